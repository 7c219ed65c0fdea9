#include "wvo/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "wvo/errors.hpp"
#include "wvo/io.hpp"

namespace wvo {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

PipelineConfig reseeded(const PipelineConfig& config, std::uint64_t seed) {
  PipelineConfig out = config;
  out.seed = seed;
  return out;
}

SamplerConfig sampler_for(const PipelineConfig& config, Stage stage, std::uint64_t index = 0) {
  SamplerConfig s = config.sampler;
  s.seed = stage_seed(config.seed, stage, index);
  return s;
}

PosteriorSamples sample_target(const PosteriorTarget& target, const PipelineConfig& config, Stage stage,
                               std::uint64_t index = 0) {
  return run_mh(target, sampler_for(config, stage, index));
}

}  // namespace

std::string PipelineConfig::canonical() const {
  std::ostringstream os;
  os << "samples=" << sampler.n_samples << ";warmup=" << sampler.warmup << ";thin=" << sampler.thin
     << ";chains=" << sampler.n_chains << ";accept=" << format_double(sampler.target_acceptance)
     << ";scale=" << format_double(sampler.initial_scale) << ";collapse=" << sampler.collapse_groups
     << ";iters=" << optimizer.max_iterations << ";step=" << format_double(optimizer.step_size)
     << ";tol=" << format_double(optimizer.tolerance) << ";window=" << optimizer.window
     << ";restarts=" << optimizer.restarts << ";n_virtual=" << n_virtual << ";k_virtual=" << k_virtual
     << ";m_virtual=" << m_virtual << ";forward=" << forward_draws << ";seed=" << seed
     << ";thresholds=" << format_double(thresholds.max_mean_diff) << "," << format_double(thresholds.min_std_ratio)
     << "," << format_double(thresholds.max_std_ratio) << "," << format_double(thresholds.max_ks);
  return os.str();
}

std::string PipelineConfig::hash() const { return hex64(fnv1a(canonical())); }

std::uint64_t stage_seed(std::uint64_t seed, Stage stage, std::uint64_t index) {
  return splitmix64(splitmix64(seed ^ (static_cast<std::uint64_t>(stage) << 56)) + index);
}

Reconstruction reconstruct_single(const ModelFamily& family, const PosteriorSamples& samples,
                                  const ObservationSet& data, const PipelineConfig& config) {
  Reconstruction r;
  const std::size_t n = config.n_virtual == 0 ? data.size() : config.n_virtual;
  r.vobs = draw_virtual_obs_single(family, samples, n, stage_seed(config.seed, Stage::kVirtual), data);
  r.single.emplace(build_single_context(family, samples, data, r.vobs.observations));
  r.context_hash = hex64(context_hash(*r.single));
  OptimizerConfig oc = config.optimizer;
  oc.seed = stage_seed(config.seed, Stage::kOptimize);
  r.result = optimize_single(*r.single, oc);
  r.weights.w = r.result.weights;
  r.budget = r.single->budget();
  return r;
}

Reconstruction reconstruct_multi(const ModelFamily& family, const PosteriorSamples& samples,
                                 const GroupedData& data, const PipelineConfig& config,
                                 const GroupLikTable* table) {
  Reconstruction r;
  r.table = table ? *table
                  : estimate_group_logliks(family, data, samples, config.forward_draws,
                                           stage_seed(config.seed, Stage::kTable));
  const std::size_t k = config.k_virtual == 0 ? data.size() : config.k_virtual;
  r.vobs = draw_virtual_groups(family, samples, k, config.m_virtual, stage_seed(config.seed, Stage::kVirtual));
  r.budget = static_cast<double>(data.size());
  r.multi.emplace(build_multi_context(family, samples, *r.table, r.vobs.groups, r.budget));
  r.context_hash = hex64(context_hash(*r.multi));
  OptimizerConfig oc = config.optimizer;
  oc.seed = stage_seed(config.seed, Stage::kOptimize);
  if (k == 1 && data.size() == 1) {
    r.result = optimize_k1(*r.multi, oc);
    r.weights.v = Eigen::VectorXd::Ones(1);
    r.weights.within = {r.result.weights};
  } else {
    r.result = optimize_multi(*r.multi, oc);
    r.weights.v = r.result.group_weights;
    r.weights.within = r.result.within;
  }
  return r;
}

WeightAssignment uniform_weights(const VirtualObservationSet& vobs, double budget) {
  WeightAssignment w;
  if (vobs.level == VirtualObservationSet::Level::kSingle) {
    const auto n = static_cast<Eigen::Index>(vobs.observations.size());
    w.w = Eigen::VectorXd::Constant(n, budget / static_cast<double>(n));
    return w;
  }
  const auto k = static_cast<Eigen::Index>(vobs.groups.size());
  w.v = Eigen::VectorXd::Constant(k, budget / static_cast<double>(k));
  for (const auto& g : vobs.groups) {
    const auto m = static_cast<Eigen::Index>(g.size());
    w.within.push_back(Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m)));
  }
  return w;
}

Validation validate_reconstruction(std::shared_ptr<const ModelFamily> family, const PosteriorSamples& reference,
                                   const VirtualObservationSet& vobs, const WeightAssignment& weights,
                                   double budget, const PipelineConfig& config, bool with_control) {
  const PosteriorSamples ref_natural = to_natural(*family, reference);
  Validation v;
  {
    const ReconditionedModel model(family, vobs, weights, budget);
    v.reconditioned = to_natural(*family, sample_target(model.target(), config, Stage::kRefit));
  }
  v.comparison = compare_posteriors(ref_natural, v.reconditioned);
  v.pass = passes(v.comparison, config.thresholds);
  if (with_control) {
    const ReconditionedModel control(family, vobs, uniform_weights(vobs, budget), budget);
    try {
      const auto draws = to_natural(*family, sample_target(control.target(), config, Stage::kControl));
      v.control = compare_posteriors(ref_natural, draws);
    } catch (const NumericalError&) {
      // the control is informational; a failed control run is reported as absent
    }
  }
  return v;
}

PosteriorSummary summarize(const ModelFamily& family, const PosteriorSamples& samples) {
  const auto natural = to_natural(family, samples);
  return {column_means(natural), column_stds(natural)};
}

FoldRecord loo_fold(std::shared_ptr<const ModelFamily> family, const GroupedData& data, std::size_t held_out,
                    const PipelineConfig& config, const std::vector<FittedMarginal::Kind>& meb_kinds,
                    const PosteriorSamples* full_posterior) {
  if (data.size() < 2) throw UsageError("leave-one-out needs at least two groups");
  const PipelineConfig cfg = reseeded(config, stage_seed(config.seed, Stage::kFold, held_out));
  const GroupedData training = data.without(held_out);
  const GroupedData held = data.only(held_out);
  const bool collapse = cfg.sampler.collapse_groups;

  FoldRecord rec;
  rec.held_out = data.labels[held_out];

  std::optional<PosteriorSamples> full_local;
  if (!full_posterior) {
    full_local = run_mh(*family, data, sampler_for(config, Stage::kFit));
    full_posterior = &*full_local;
  }
  rec.full = summarize(*family, *full_posterior);

  const PosteriorSamples train = run_mh(*family, training, sampler_for(cfg, Stage::kFit));
  const Reconstruction r = reconstruct_multi(*family, train, training, cfg);
  const ReconditionedModel model(family, r.vobs, r.weights, r.budget);

  const auto reconditioned = to_natural(*family, sample_target(model.target(), cfg, Stage::kRefit));
  rec.reconstruction = compare_posteriors(to_natural(*family, train), reconditioned);
  rec.reconstruction_pass = passes(rec.reconstruction, cfg.thresholds);

  PosteriorTarget incremental = model.target();
  incremental.add_groups(held, collapse);
  const auto updated = sample_target(incremental, cfg, Stage::kRefit, 1);
  rec.wvo = summarize(*family, updated);
  rec.incremental = compare_posteriors(to_natural(*family, *full_posterior), to_natural(*family, updated));

  if (!meb_kinds.empty()) {
    const auto fits = meb_fit(to_natural(*family, train), meb_kinds);
    PosteriorTarget meb(*family);
    meb.set_prior(meb_prior(family, fits));
    meb.add_groups(held, collapse);
    rec.meb = summarize(*family, sample_target(meb, cfg, Stage::kRefit, 2));
  }
  return rec;
}

std::vector<FoldRecord> loo_cross_validation(std::shared_ptr<const ModelFamily> family, const GroupedData& data,
                                             const PipelineConfig& config,
                                             const std::vector<FittedMarginal::Kind>& meb_kinds,
                                             std::vector<std::size_t> folds) {
  if (data.size() < 2) throw UsageError("leave-one-out needs at least two groups");
  if (folds.empty()) folds = spaced_folds(data.size(), data.size());
  const PosteriorSamples full = run_mh(*family, data, sampler_for(config, Stage::kFit));
  std::vector<FoldRecord> out;
  for (std::size_t k : folds) out.push_back(loo_fold(family, data, k, config, meb_kinds, &full));
  return out;
}

std::vector<SweepRow> sweep_k(std::shared_ptr<const ModelFamily> family, const GroupedData& data,
                              const PipelineConfig& config, const std::vector<std::size_t>& k_list,
                              std::vector<std::size_t> folds) {
  if (data.size() < 2) throw UsageError("the subsampling sweep needs at least two groups");
  if (k_list.empty()) throw UsageError("the subsampling sweep needs at least one K value");
  if (folds.empty()) folds = spaced_folds(data.size(), data.size());
  std::vector<SweepRow> out;
  for (std::size_t fold : folds) {
    const PipelineConfig cfg = reseeded(config, stage_seed(config.seed, Stage::kFold, fold));
    const GroupedData training = data.without(fold);
    const GroupedData held = data.only(fold);
    const PosteriorSamples train = run_mh(*family, training, sampler_for(cfg, Stage::kFit));
    const GroupLikTable table =
        estimate_group_logliks(*family, training, train, cfg.forward_draws, stage_seed(cfg.seed, Stage::kTable));
    for (std::size_t k : k_list) {
      if (k < 1) throw UsageError("K values must be positive");
      PipelineConfig kc = reseeded(cfg, stage_seed(cfg.seed, Stage::kVirtual, k));
      kc.k_virtual = k;
      const Reconstruction r = reconstruct_multi(*family, train, training, kc, &table);
      const ReconditionedModel model(family, r.vobs, r.weights, r.budget);
      PosteriorTarget incremental = model.target();
      incremental.add_groups(held, kc.sampler.collapse_groups);
      out.push_back({k, data.labels[fold], summarize(*family, sample_target(incremental, kc, Stage::kRefit))});
    }
  }
  return out;
}

std::vector<double> fold_variation(const std::vector<PosteriorSummary>& summaries) {
  if (summaries.size() < 2) throw UsageError("fold variation needs at least two folds");
  const std::size_t d = summaries.front().mean.size();
  std::vector<double> out(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (const auto& s : summaries) m += s.mean[j];
    m /= static_cast<double>(summaries.size());
    double acc = 0.0;
    for (const auto& s : summaries) acc += (s.mean[j] - m) * (s.mean[j] - m);
    out[j] = std::sqrt(acc / static_cast<double>(summaries.size() - 1));
  }
  return out;
}

std::vector<std::size_t> spaced_folds(std::size_t n, std::size_t count) {
  if (n == 0) return {};
  count = std::min(count, n);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(i * n / count);
  return out;
}

}  // namespace wvo
