#include "wvo/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "wvo/errors.hpp"

namespace wvo {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ',';
    out += parts[i];
  }
  return out;
}

std::string aux_column(const CsvTable& t) {
  if (t.has_column("sigma")) return "sigma";
  if (t.has_column("n")) return "n";
  return {};
}

Observation parse_observation(const CsvTable& t, const std::vector<std::string>& row, std::size_t y_col,
                              const std::string& aux, const fs::path& path) {
  Observation obs;
  try {
    obs.value = parse_double(row.at(y_col));
    if (!aux.empty()) obs.aux = parse_double(row.at(t.column(aux)));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed row '" + join(row) + "'");
  }
  if (!std::isfinite(obs.value)) throw DataError(path.string() + ": non-finite observation");
  return obs;
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& header, const Provenance& prov) {
  std::string out = prov.comment() + "\n" + join(header) + "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i + 1));
  return out;
}

std::uint64_t hash_matrix(const Eigen::MatrixXd& m, std::uint64_t h) {
  h = fnv1a(std::string_view(reinterpret_cast<const char*>(m.data()), sizeof(double) * static_cast<std::size_t>(m.size())), h);
  const std::string dims = std::to_string(m.rows()) + "x" + std::to_string(m.cols());
  return fnv1a(dims, h);
}

Eigen::VectorXd json_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

}  // namespace

std::uint64_t fnv1a(std::string_view data, std::uint64_t h) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  if (t == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size()) {
    throw DataError("not a number: '" + t + "'");
  }
  return v;
}

std::string Provenance::comment() const { return "# config_hash=" + config_hash + " seed=" + std::to_string(seed); }

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw DataError("missing column '" + std::string(name) + "'");
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    const std::string s = trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      t.comments.push_back(trim(std::string_view(s).substr(1)));
      continue;
    }
    if (t.header.empty()) {
      t.header = split(s);
      continue;
    }
    auto row = split(s);
    if (row.size() != t.header.size()) throw DataError(path.string() + ": row has the wrong number of fields: " + s);
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw DataError(path.string() + ": no header line");
  return t;
}

ObservationSet read_observations(const fs::path& path, const ModelFamily& family) {
  const CsvTable t = read_csv(path);
  const std::size_t y = t.column("y");
  const std::string aux = aux_column(t);
  ObservationSet out;
  for (const auto& row : t.rows) {
    out.push_back(parse_observation(t, row, y, aux, path));
    family.check_observation(out.back());
  }
  if (out.empty()) throw DataError(path.string() + ": no observations");
  return out;
}

GroupedData read_grouped(const fs::path& path, const ModelFamily& family) {
  const CsvTable t = read_csv(path);
  const bool labelled = t.has_column("group");
  const std::size_t g = labelled ? t.column("group") : 0;
  const std::size_t y = t.column("y");
  const std::string aux = aux_column(t);
  GroupedData out;
  std::map<std::string, std::size_t> index;
  for (const auto& row : t.rows) {
    const std::string label = labelled ? row[g] : "all";
    const auto [it, inserted] = index.emplace(label, out.groups.size());
    if (inserted) {
      out.labels.push_back(label);
      out.groups.emplace_back();
    }
    out.groups[it->second].push_back(parse_observation(t, row, y, aux, path));
    family.check_observation(out.groups[it->second].back());
  }
  check_grouped(out);
  return out;
}

void write_samples_csv(const fs::path& path, const PosteriorSamples& samples, const Provenance& prov) {
  std::string chains = "# chains=";
  for (std::size_t c = 0; c < samples.chain_lengths.size(); ++c) {
    if (c) chains += ',';
    chains += std::to_string(samples.chain_lengths[c]);
  }
  std::string text = prov.comment() + "\n" + chains + "\n" + join(samples.names) + "\n";
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto row = samples.row(s);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) text += ',';
      text += format_double(row[j]);
    }
    text += '\n';
  }
  write_text(path, text);
}

PosteriorSamples read_samples_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  PosteriorSamples out;
  out.names = t.header;
  out.draws.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const double v = parse_double(t.rows[r][c]);
      if (!std::isfinite(v)) throw DataError(path.string() + ": non-finite draw");
      out.draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  for (const auto& c : t.comments) {
    if (c.rfind("chains=", 0) != 0) continue;
    std::size_t total = 0;
    for (const auto& part : split(std::string_view(c).substr(7))) {
      out.chain_lengths.push_back(static_cast<std::size_t>(parse_double(part)));
      total += out.chain_lengths.back();
    }
    if (total != out.size()) throw DataError(path.string() + ": chain lengths do not add up to the row count");
  }
  if (out.chain_lengths.empty()) out.chain_lengths = {out.size()};
  if (out.size() < 2) throw DataError(path.string() + ": too few draws");
  out.ess = ess(out);
  return out;
}

void write_ess_csv(const fs::path& path, const ModelFamily& family, const PosteriorSamples& samples,
                   const Provenance& prov) {
  const PosteriorSamples natural = to_natural(family, samples);
  const auto means = column_means(natural);
  const auto sds = column_stds(natural);
  std::string text = prov.comment() + "\n# acceptance=";
  for (std::size_t c = 0; c < samples.acceptance.size(); ++c) {
    if (c) text += ',';
    text += format_double(samples.acceptance[c]);
  }
  text += "\nparameter,internal,ess,mean,sd\n";
  for (std::size_t j = 0; j < samples.dim(); ++j) {
    text += natural.names[j] + "," + samples.names[j] + "," + format_double(samples.ess[j]) + "," +
            format_double(means[j]) + "," + format_double(sds[j]) + "\n";
  }
  write_text(path, text);
}

void write_group_table_csv(const fs::path& path, const GroupLikTable& table, const std::vector<std::string>& labels,
                           const Provenance& prov) {
  if (labels.size() != static_cast<std::size_t>(table.log_lik.cols())) throw UsageError("one label per group column");
  write_text(path, prov.comment() + "\n# forward_draws=" + std::to_string(table.forward_draws) + "\n" +
                       matrix_csv(table.log_lik, labels, prov).substr(prov.comment().size() + 1));
}

GroupLikTable read_group_table_csv(const fs::path& path) {
  const CsvTable t = read_csv(path);
  GroupLikTable out;
  for (const auto& c : t.comments) {
    if (c.rfind("forward_draws=", 0) == 0) out.forward_draws = static_cast<std::size_t>(parse_double(c.substr(14)));
  }
  if (out.forward_draws < 1) throw DataError(path.string() + ": missing forward draw count");
  out.log_lik.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const double v = parse_double(t.rows[r][c]);
      if (std::isnan(v)) throw DataError(path.string() + ": NaN group likelihood");
      out.log_lik(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return out;
}

void write_trace_csv(const fs::path& path, const OptimizationResult& result, const Provenance& prov) {
  std::string text = prov.comment() + "\n# best_restart=" + std::to_string(result.best_restart) +
                     " converged=" + (result.converged ? "true" : "false") + "\n";
  for (std::size_t r = 0; r < result.restarts.size(); ++r) {
    const auto& rec = result.restarts[r];
    text += "# restart=" + std::to_string(r) + " iterations=" + std::to_string(rec.iterations) +
            " objective=" + format_double(rec.objective) + " converged=" + (rec.converged ? "true" : "false") + "\n";
  }
  text += "iteration,objective\n";
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    text += std::to_string(i) + "," + format_double(result.trace[i]) + "\n";
  }
  write_text(path, text);
}

std::uint64_t context_hash(const SingleLevelContext& ctx) {
  std::uint64_t h = fnv1a("single");
  h = hash_matrix(ctx.L(), h);
  h = hash_matrix(ctx.base(), h);
  return fnv1a(format_double(ctx.budget()), h);
}

std::uint64_t context_hash(const MultiLevelContext& ctx) {
  std::uint64_t h = fnv1a("multi");
  for (const auto& m : ctx.Lz()) h = hash_matrix(m, h);
  h = hash_matrix(ctx.base(), h);
  return fnv1a(format_double(ctx.budget()), h);
}

void write_context(const fs::path& dir, const SingleLevelContext& ctx, const Provenance& prov) {
  fs::create_directories(dir);
  write_text(dir / "L.csv", matrix_csv(ctx.L(), numbered("v", ctx.virtual_count()), prov));
  write_text(dir / "base.csv", matrix_csv(ctx.base(), {"base"}, prov));
  nlohmann::json m = {{"level", "single"},
                      {"samples", ctx.samples()},
                      {"virtual", ctx.virtual_count()},
                      {"budget", ctx.budget()},
                      {"files", {"L.csv", "base.csv"}},
                      {"context_hash", hex64(context_hash(ctx))},
                      {"config_hash", prov.config_hash},
                      {"seed", prov.seed}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void write_context(const fs::path& dir, const MultiLevelContext& ctx, const Provenance& prov) {
  fs::create_directories(dir);
  auto files = nlohmann::json::array();
  for (std::size_t k = 0; k < ctx.groups(); ++k) {
    const std::string name = "Lz_" + std::to_string(k + 1) + ".csv";
    write_text(dir / name, matrix_csv(ctx.Lz()[k], numbered("z", ctx.per_group()), prov));
    files.push_back(name);
  }
  write_text(dir / "base.csv", matrix_csv(ctx.base(), {"base"}, prov));
  files.push_back("base.csv");
  nlohmann::json m = {{"level", "multi"},
                      {"samples", ctx.samples()},
                      {"groups", ctx.groups()},
                      {"per_group", ctx.per_group()},
                      {"budget", ctx.budget()},
                      {"files", files},
                      {"context_hash", hex64(context_hash(ctx))},
                      {"config_hash", prov.config_hash},
                      {"seed", prov.seed}};
  write_text(dir / "manifest.json", m.dump(2) + "\n");
}

nlohmann::json to_json(const WvoFile& file) {
  nlohmann::json j;
  j["schema_version"] = file.schema_version;
  j["model"] = file.model;
  j["budget"] = file.budget;
  j["provenance"] = {{"seed", file.seed}, {"config_hash", file.config_hash}, {"context_hash", file.context_hash},
                     {"virtual_seed", file.vobs.seed}};
  if (file.vobs.level == VirtualObservationSet::Level::kSingle) {
    j["level"] = "single";
    const Eigen::VectorXd w = round_small_weights(file.weights.w, file.budget);
    auto obs = nlohmann::json::array();
    for (std::size_t i = 0; i < file.vobs.observations.size(); ++i) {
      const auto& y = file.vobs.observations[i];
      obs.push_back({{"value", y.value},
                     {"aux", y.aux},
                     {"weight", w[static_cast<Eigen::Index>(i)]},
                     {"source", file.vobs.sources.empty() ? 0 : file.vobs.sources[i]}});
    }
    j["observations"] = obs;
  } else {
    j["level"] = "multi";
    const Eigen::VectorXd v = round_small_weights(file.weights.v, file.budget);
    auto groups = nlohmann::json::array();
    for (std::size_t k = 0; k < file.vobs.groups.size(); ++k) {
      const Eigen::VectorXd wk = round_small_weights(file.weights.within[k], 1.0);
      auto values = nlohmann::json::array();
      for (std::size_t i = 0; i < file.vobs.groups[k].size(); ++i) {
        values.push_back({{"value", file.vobs.groups[k][i]},
                          {"weight", wk[static_cast<Eigen::Index>(i)]},
                          {"source", file.vobs.group_sources.empty() ? 0 : file.vobs.group_sources[k][i]}});
      }
      groups.push_back({{"weight", v[static_cast<Eigen::Index>(k)]}, {"values", values}});
    }
    j["groups"] = groups;
  }
  return j;
}

WvoFile wvo_from_json(const nlohmann::json& j) {
  try {
    WvoFile f;
    f.schema_version = j.at("schema_version").get<int>();
    if (f.schema_version != kWvoSchemaVersion) {
      throw DataError("unsupported WVO schema version " + std::to_string(f.schema_version));
    }
    f.model = j.at("model").get<std::string>();
    f.budget = j.at("budget").get<double>();
    const auto& prov = j.at("provenance");
    f.seed = prov.at("seed").get<std::uint64_t>();
    f.config_hash = prov.at("config_hash").get<std::string>();
    f.context_hash = prov.at("context_hash").get<std::string>();
    f.vobs.seed = prov.at("virtual_seed").get<std::uint64_t>();
    const std::string level = j.at("level").get<std::string>();
    if (level == "single") {
      f.vobs.level = VirtualObservationSet::Level::kSingle;
      std::vector<double> w;
      for (const auto& o : j.at("observations")) {
        f.vobs.observations.push_back({o.at("value").get<double>(), o.at("aux").get<double>()});
        f.vobs.sources.push_back(o.at("source").get<std::size_t>());
        w.push_back(o.at("weight").get<double>());
      }
      f.weights.w = json_vector(w);
    } else if (level == "multi") {
      f.vobs.level = VirtualObservationSet::Level::kMulti;
      std::vector<double> v;
      for (const auto& g : j.at("groups")) {
        v.push_back(g.at("weight").get<double>());
        std::vector<std::vector<double>> values;
        std::vector<std::size_t> sources;
        std::vector<double> w;
        for (const auto& z : g.at("values")) {
          values.push_back(z.at("value").get<std::vector<double>>());
          sources.push_back(z.at("source").get<std::size_t>());
          w.push_back(z.at("weight").get<double>());
        }
        f.vobs.groups.push_back(std::move(values));
        f.vobs.group_sources.push_back(std::move(sources));
        f.weights.within.push_back(json_vector(w));
      }
      f.weights.v = json_vector(v);
    } else {
      throw DataError("unknown WVO level '" + level + "'");
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed WVO file: ") + e.what());
  }
}

void write_wvo(const fs::path& path, const WvoFile& file) { write_text(path, to_json(file).dump(2) + "\n"); }

WvoFile read_wvo(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return wvo_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_comparison_csv(const fs::path& path, const PosteriorComparison& wvo, const PosteriorComparison* control,
                          const Thresholds& thresholds, const Provenance& prov) {
  std::string text = prov.comment() + "\n# thresholds mean_diff<" + format_double(thresholds.max_mean_diff) +
                     " std_ratio=[" + format_double(thresholds.min_std_ratio) + "," +
                     format_double(thresholds.max_std_ratio) + "] ks<" + format_double(thresholds.max_ks) + "\n";
  text += "weights,parameter,mean_diff,std_ratio,ks,pass\n";
  auto emit = [&](const char* tag, const PosteriorComparison& c) {
    for (const auto& d : c.dims) {
      text += std::string(tag) + "," + d.name + "," + format_double(d.mean_diff) + "," + format_double(d.std_ratio) +
              "," + format_double(d.ks) + "," + (passes(d, thresholds) ? "true" : "false") + "\n";
    }
  };
  emit("optimized", wvo);
  if (control) emit("uniform", *control);
  write_text(path, text);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out << text;
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace wvo
