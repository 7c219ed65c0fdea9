// wvo: fit a posterior, compress it into weighted virtual observations, and check the result.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "wvo/errors.hpp"
#include "wvo/io.hpp"
#include "wvo/pipeline.hpp"

namespace {

using namespace wvo;

constexpr int kExitPass = 0;
constexpr int kExitValidationFail = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string model;
  std::string data;
  std::string out = "wvo_out";
  PipelineConfig config;
  std::string k_list = "5,10,20,40,71";
  std::size_t folds = 0;
};

struct Run {
  std::shared_ptr<const ModelFamily> family;
  ObservationSet flat;
  GroupedData grouped;
  Provenance prov;

  bool multi() const { return family->structure() == Structure::kMultiLevel; }
};

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return hex64(fnv1a(os.str()));
}

Run load(const Options& opt) {
  if (opt.model.empty()) throw UsageError("--model is required");
  if (opt.data.empty()) throw UsageError("--data is required");
  Run run;
  run.family = make_family(opt.model);
  if (!fs::exists(opt.data)) throw DataError("data file not found: " + opt.data);
  if (run.multi()) {
    run.grouped = read_grouped(opt.data, *run.family);
  } else {
    run.flat = read_observations(opt.data, *run.family);
  }
  const std::string canonical = "model=" + opt.model + ";data=" + file_digest(opt.data) + ";" + opt.config.canonical();
  run.prov = {hex64(fnv1a(canonical)), opt.config.seed};
  return run;
}

fs::path require_file(const fs::path& path, const char* produced_by) {
  if (!fs::exists(path)) {
    throw UsageError(path.string() + " not found; run `wvo " + std::string(produced_by) + "` with the same --out first");
  }
  return path;
}

void print_comparison(const char* tag, const PosteriorComparison& c, const Thresholds& t) {
  for (const auto& d : c.dims) {
    std::printf("%-10s %-12s mean_diff=%.4f std_ratio=%.4f ks=%.4f %s\n", tag, d.name.c_str(), d.mean_diff,
                d.std_ratio, d.ks, passes(d, t) ? "pass" : "FAIL");
  }
}

int cmd_fit(const Options& opt) {
  const Run run = load(opt);
  SamplerConfig sc = opt.config.sampler;
  sc.seed = stage_seed(opt.config.seed, Stage::kFit);
  const fs::path out = opt.out;
  if (run.multi()) {
    const PosteriorSamples samples = run_mh(*run.family, run.grouped, sc);
    const GroupLikTable table = estimate_group_logliks(*run.family, run.grouped, samples, opt.config.forward_draws,
                                                       stage_seed(opt.config.seed, Stage::kTable));
    write_samples_csv(out / "samples.csv", samples, run.prov);
    write_ess_csv(out / "ess.csv", *run.family, samples, run.prov);
    write_group_table_csv(out / "group_logliks.csv", table, run.grouped.labels, run.prov);
  } else {
    const PosteriorSamples samples = run_mh(*run.family, run.flat, sc);
    write_samples_csv(out / "samples.csv", samples, run.prov);
    write_ess_csv(out / "ess.csv", *run.family, samples, run.prov);
  }
  std::cout << std::ifstream(out / "ess.csv").rdbuf();
  return kExitPass;
}

int cmd_reconstruct(const Options& opt) {
  const Run run = load(opt);
  const fs::path out = opt.out;
  const PosteriorSamples samples = read_samples_csv(require_file(out / "samples.csv", "fit"));
  if (samples.names != run.family->latent_names()) throw UsageError("samples.csv was not produced for this model");
  Reconstruction r;
  if (run.multi()) {
    const GroupLikTable table = read_group_table_csv(require_file(out / "group_logliks.csv", "fit"));
    r = reconstruct_multi(*run.family, samples, run.grouped, opt.config, &table);
    write_context(out / "context", *r.multi, run.prov);
  } else {
    r = reconstruct_single(*run.family, samples, run.flat, opt.config);
    write_context(out / "context", *r.single, run.prov);
  }
  WvoFile file;
  file.model = opt.model;
  file.vobs = r.vobs;
  file.weights = r.weights;
  file.budget = r.budget;
  file.seed = opt.config.seed;
  file.config_hash = run.prov.config_hash;
  file.context_hash = r.context_hash;
  write_wvo(out / "wvo.json", file);
  write_trace_csv(out / "objective_trace.csv", r.result, run.prov);
  std::printf("objective=%.6f (fit %.6f, normaliser %.6f) restart=%zu converged=%s iterations=%zu\n", r.result.objective,
              r.result.terms.fit, r.result.terms.normaliser, r.result.best_restart,
              r.result.converged ? "yes" : "no", r.result.trace.size());
  return kExitPass;
}

int cmd_validate(const Options& opt) {
  const Run run = load(opt);
  const fs::path out = opt.out;
  const PosteriorSamples samples = read_samples_csv(require_file(out / "samples.csv", "fit"));
  const WvoFile file = read_wvo(require_file(out / "wvo.json", "reconstruct"));
  if (file.model != opt.model) throw UsageError("wvo.json was produced for model " + file.model);
  const Validation v =
      validate_reconstruction(run.family, samples, file.vobs, file.weights, file.budget, opt.config, true);
  write_comparison_csv(out / "validation.csv", v.comparison, v.control ? &*v.control : nullptr, opt.config.thresholds,
                       run.prov);
  write_samples_csv(out / "reconditioned_samples.csv", v.reconditioned, run.prov);
  print_comparison("optimized", v.comparison, opt.config.thresholds);
  if (v.control) print_comparison("uniform", *v.control, opt.config.thresholds);
  std::printf("%s\n", v.pass ? "PASS" : "FAIL");
  return v.pass ? kExitPass : kExitValidationFail;
}

std::vector<FittedMarginal::Kind> meb_kinds_for(const ModelFamily& family) {
  // Normal for the location, Gamma for the positive scale
  if (family.name() == "eight-schools") return {FittedMarginal::Kind::kNormal, FittedMarginal::Kind::kGamma};
  return {};
}

std::string summary_cells(const std::optional<PosteriorSummary>& s, std::size_t j) {
  if (!s) return ",";
  return format_double(s->mean[j]) + "," + format_double(s->sd[j]);
}

int cmd_loo(const Options& opt) {
  const Run run = load(opt);
  if (!run.multi()) throw UsageError("loo needs a multi-level model");
  if (run.grouped.size() < 2) throw UsageError("loo needs at least two groups");
  const auto kinds = meb_kinds_for(*run.family);
  const auto folds = opt.folds == 0 ? std::vector<std::size_t>{} : spaced_folds(run.grouped.size(), opt.folds);
  const auto records = loo_cross_validation(run.family, run.grouped, opt.config, kinds, folds);
  const auto names = run.family->natural_names();

  std::string text = run.prov.comment() +
                     "\nfold,parameter,full_mean,full_sd,wvo_mean,wvo_sd,meb_mean,meb_sd,"
                     "recon_mean_diff,recon_std_ratio,recon_ks,recon_pass\n";
  std::vector<PosteriorSummary> wvo, meb;
  bool all_pass = true;
  for (const auto& r : records) {
    wvo.push_back(r.wvo);
    if (r.meb) meb.push_back(*r.meb);
    all_pass = all_pass && r.reconstruction_pass;
    for (std::size_t j = 0; j < names.size(); ++j) {
      const auto& d = r.reconstruction.dims[j];
      text += r.held_out + "," + names[j] + "," + summary_cells(r.full, j) + "," + summary_cells(r.wvo, j) + "," +
              summary_cells(r.meb, j) + "," + format_double(d.mean_diff) + "," + format_double(d.std_ratio) + "," +
              format_double(d.ks) + "," + (passes(d, opt.config.thresholds) ? "true" : "false") + "\n";
    }
  }
  write_text(fs::path(opt.out) / "loo.csv", text);

  std::string summary = run.prov.comment() + "\nparameter,wvo_fold_sd,meb_fold_sd\n";
  const auto wv = fold_variation(wvo);
  const auto mv = meb.empty() ? std::vector<double>{} : fold_variation(meb);
  for (std::size_t j = 0; j < names.size(); ++j) {
    summary += names[j] + "," + format_double(wv[j]) + "," + (mv.empty() ? "" : format_double(mv[j])) + "\n";
    std::printf("%-8s fold sd of posterior mean: wvo=%.4f%s\n", names[j].c_str(), wv[j],
                mv.empty() ? "" : (" meb=" + format_double(mv[j])).c_str());
  }
  write_text(fs::path(opt.out) / "loo_summary.csv", summary);
  std::printf("reconstructions: %s\n", all_pass ? "all pass" : "some FAIL");
  return all_pass ? kExitPass : kExitValidationFail;
}

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const double v = parse_double(part);
    if (!(v >= 1.0) || v != static_cast<double>(static_cast<std::size_t>(v))) {
      throw UsageError("--k-list entries must be positive integers");
    }
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw UsageError("--k-list is empty");
  return out;
}

int cmd_sweep(const Options& opt) {
  const Run run = load(opt);
  if (!run.multi()) throw UsageError("sweep-k needs a multi-level model");
  if (run.grouped.size() < 2) throw UsageError("sweep-k needs at least two groups");
  const auto k_list = parse_k_list(opt.k_list);
  const auto folds = opt.folds == 0 ? std::vector<std::size_t>{} : spaced_folds(run.grouped.size(), opt.folds);
  const auto rows = sweep_k(run.family, run.grouped, opt.config, k_list, folds);
  const auto names = run.family->natural_names();

  std::string text = run.prov.comment() + "\nk_virtual,fold";
  for (const auto& n : names) text += "," + n + "_mean," + n + "_sd";
  text += "\n";
  for (const auto& r : rows) {
    text += std::to_string(r.k_virtual) + "," + r.held_out;
    for (std::size_t j = 0; j < names.size(); ++j) text += "," + format_double(r.wvo.mean[j]) + "," + format_double(r.wvo.sd[j]);
    text += "\n";
  }
  write_text(fs::path(opt.out) / "sweep.csv", text);

  std::string summary = run.prov.comment() + "\nk_virtual";
  for (const auto& n : names) summary += "," + n + "_fold_sd";
  summary += "\n";
  for (std::size_t k : k_list) {
    std::vector<PosteriorSummary> s;
    for (const auto& r : rows) {
      if (r.k_virtual == k) s.push_back(r.wvo);
    }
    summary += std::to_string(k);
    std::printf("K=%-4zu", k);
    if (s.size() >= 2) {
      const auto v = fold_variation(s);
      for (std::size_t j = 0; j < v.size(); ++j) {
        summary += "," + format_double(v[j]);
        std::printf(" %s_fold_sd=%.4f", names[j].c_str(), v[j]);
      }
    }
    summary += "\n";
    std::printf("\n");
  }
  write_text(fs::path(opt.out) / "sweep_summary.csv", summary);
  return kExitPass;
}

void add_common(CLI::App& app, Options& opt) {
  auto& c = opt.config;
  app.add_option("--model", opt.model, "model family")->check(CLI::IsMember(family_names()));
  app.add_option("--data", opt.data, "observation CSV");
  app.add_option("--out", opt.out, "output directory")->capture_default_str();
  app.add_option("--seed", c.seed, "base seed")->capture_default_str();
  app.add_option("--samples", c.sampler.n_samples, "posterior draws S")->capture_default_str();
  app.add_option("--warmup", c.sampler.warmup, "warmup iterations per chain")->capture_default_str();
  app.add_option("--thin", c.sampler.thin, "thinning stride")->capture_default_str();
  app.add_option("--chains", c.sampler.n_chains, "chains")->capture_default_str();
  app.add_option("--n-virtual", c.n_virtual, "single-level virtual set size (0: N*)")->capture_default_str();
  app.add_option("--k-virtual", c.k_virtual, "virtual groups (0: K*)")->capture_default_str();
  app.add_option("--m-virtual", c.m_virtual, "values per virtual group")->capture_default_str();
  app.add_option("--forward-draws", c.forward_draws, "forward draws T per group likelihood")->capture_default_str();
  app.add_option("--restarts", c.optimizer.restarts, "optimizer restarts")->capture_default_str();
  app.add_option("--max-iters", c.optimizer.max_iterations, "optimizer iterations per restart")->capture_default_str();
  app.add_option("--step", c.optimizer.step_size, "optimizer step size")->capture_default_str();
  app.add_option("--tol", c.optimizer.tolerance, "objective change over the convergence window")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weighted virtual observations: compress a posterior into a small weighted data set."};
  Options opt;
  add_common(app, opt);
  app.require_subcommand(1);
  auto* fit = app.add_subcommand("fit", "sample the posterior; writes samples.csv, ess.csv (and group_logliks.csv)");
  auto* rec = app.add_subcommand("reconstruct", "draw virtual observations and optimize weights; writes wvo.json");
  auto* val = app.add_subcommand("validate", "re-sample the weighted model and compare; writes validation.csv");
  auto* loo = app.add_subcommand("loo", "leave-one-group-out cross-validation; writes loo.csv");
  auto* sweep = app.add_subcommand("sweep-k", "virtual group count sweep over folds; writes sweep.csv");
  loo->add_option("--folds", opt.folds, "number of evenly spaced folds (0: all)");
  sweep->add_option("--folds", opt.folds, "number of evenly spaced folds (0: all)");
  sweep->add_option("--k-list", opt.k_list, "comma separated virtual group counts")->capture_default_str();
  for (auto* sub : {fit, rec, val, loo, sweep}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    opt.config.sampler.validate();
    opt.config.optimizer.validate();
    if (opt.config.m_virtual < 1 || opt.config.forward_draws < 1) throw UsageError("sizes must be positive");
    if (fit->parsed()) return cmd_fit(opt);
    if (rec->parsed()) return cmd_reconstruct(opt);
    if (val->parsed()) return cmd_validate(opt);
    if (loo->parsed()) return cmd_loo(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
