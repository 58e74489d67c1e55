#include "kmesn/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "kmesn/errors.hpp"
#include "kmesn/parallel.hpp"

namespace kmesn {

namespace {
constexpr std::uint64_t kStreamFolds = 21;
constexpr std::uint64_t kStreamStage = 22;
constexpr std::uint64_t kStreamJoint = 23;
}  // namespace

std::string_view to_string(Param p) noexcept {
  switch (p) {
    case Param::input_scaling:
      return "input_scaling";
    case Param::spectral_radius:
      return "spectral_radius";
    case Param::leakage:
      return "leakage";
    case Param::bias_scaling:
      return "bias_scaling";
    case Param::regularization:
      return "regularization";
  }
  return "input_scaling";
}

Param parse_param(std::string_view name) {
  for (Param p : kSearchParams)
    if (to_string(p) == name) return p;
  throw ConfigError("unknown hyper-parameter '" + std::string(name) + "'");
}

double get_param(const HyperParams& hp, Param p) noexcept {
  switch (p) {
    case Param::input_scaling:
      return hp.input_scaling;
    case Param::spectral_radius:
      return hp.spectral_radius;
    case Param::leakage:
      return hp.leakage;
    case Param::bias_scaling:
      return hp.bias_scaling;
    case Param::regularization:
      return hp.regularization;
  }
  return 0.0;
}

void set_param(HyperParams& hp, Param p, double value) noexcept {
  switch (p) {
    case Param::input_scaling:
      hp.input_scaling = value;
      break;
    case Param::spectral_radius:
      hp.spectral_radius = value;
      break;
    case Param::leakage:
      hp.leakage = value;
      break;
    case Param::bias_scaling:
      hp.bias_scaling = value;
      break;
    case Param::regularization:
      hp.regularization = value;
      break;
  }
}

// ---------------------------------------------------------------------------
// Distributions

std::string_view to_string(ParamDistribution::Kind k) noexcept {
  switch (k) {
    case ParamDistribution::Kind::uniform:
      return "uniform";
    case ParamDistribution::Kind::loguniform:
      return "loguniform";
    case ParamDistribution::Kind::grid:
      return "grid";
  }
  return "uniform";
}

ParamDistribution::Kind parse_distribution_kind(std::string_view name) {
  if (name == "uniform") return ParamDistribution::Kind::uniform;
  if (name == "loguniform") return ParamDistribution::Kind::loguniform;
  if (name == "grid") return ParamDistribution::Kind::grid;
  throw ConfigError("unknown distribution '" + std::string(name) + "'");
}

void ParamDistribution::validate() const {
  if (!std::isfinite(low) || !std::isfinite(high) || low > high) {
    throw ConfigError("distribution bounds must be finite with low <= high");
  }
  if (kind == Kind::loguniform && !(low > 0.0)) throw ConfigError("loguniform needs low > 0");
  if (kind == Kind::grid && steps < 1) throw ConfigError("grid needs at least one step");
}

std::vector<double> ParamDistribution::grid_points() const {
  if (steps <= 1) return {low};
  std::vector<double> pts(steps);
  const double step = (high - low) / static_cast<double>(steps - 1);
  for (std::size_t i = 0; i < steps; ++i) pts[i] = low + step * static_cast<double>(i);
  pts.back() = high;
  return pts;
}

double ParamDistribution::sample(Rng& rng) const {
  switch (kind) {
    case Kind::uniform:
      return low == high ? low : std::clamp(kmesn::uniform(rng, low, high), low, high);
    case Kind::loguniform: {
      if (low == high) return low;
      const double e = kmesn::uniform(rng, std::log(low), std::log(high));
      return std::clamp(std::exp(e), low, high);
    }
    case Kind::grid: {
      const auto pts = grid_points();
      return pts[uniform_index(rng, pts.size())];
    }
  }
  return low;
}

bool ParamDistribution::contains(double v) const noexcept { return v >= low && v <= high; }

bool SearchStage::is_grid() const noexcept {
  return !params.empty() && std::all_of(params.begin(), params.end(), [](const ParamSpec& s) {
    return s.dist.kind == ParamDistribution::Kind::grid;
  });
}

std::size_t SearchStage::candidate_count() const noexcept {
  if (!is_grid()) return iterations;
  std::size_t n = 1;
  for (const auto& s : params) n *= std::max<std::size_t>(1, s.dist.steps);
  return n;
}

// ---------------------------------------------------------------------------
// Folds

std::vector<Fold> kfold_split(std::size_t n_sequences, const CvPlan& plan) {
  if (plan.folds < 2) throw ConfigError("cross-validation needs at least 2 folds");
  if (n_sequences < plan.folds) {
    throw ConfigError("cannot split " + std::to_string(n_sequences) + " sequences into " +
                      std::to_string(plan.folds) + " folds");
  }
  std::vector<std::size_t> perm(n_sequences);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_rng(plan.seed, kStreamFolds);
  for (std::size_t i = n_sequences; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);

  std::vector<std::size_t> owner(n_sequences);
  const std::size_t base = n_sequences / plan.folds;
  const std::size_t extra = n_sequences % plan.folds;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < plan.folds; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) owner[perm[pos++]] = f;
  }
  std::vector<Fold> folds(plan.folds);
  for (std::size_t i = 0; i < n_sequences; ++i)
    for (std::size_t f = 0; f < plan.folds; ++f)
      (owner[i] == f ? folds[f].validation : folds[f].train).push_back(i);
  return folds;
}

// ---------------------------------------------------------------------------
// Candidate evaluation

CandidateEvaluator::CandidateEvaluator(SequenceDataset data, WeightSet weights,
                                       std::vector<Fold> folds, MsePooling pooling)
    : data_(std::move(data)),
      weights_(std::move(weights)),
      folds_(std::move(folds)),
      pooling_(pooling) {
  if (data_.empty()) throw DegenerateInput("candidate evaluation needs a non-empty dataset");
  if (folds_.empty()) throw ConfigError("candidate evaluation needs at least one fold");
  data_.validate();
  if (data_.input_dim() != weights_.input_dim()) {
    throw DimensionError("dataset has " + std::to_string(data_.input_dim()) +
                         " features, weights expect " + std::to_string(weights_.input_dim()));
  }
  const std::size_t n = data_.sequences.size();
  for (const auto& f : folds_) {
    if (f.train.empty() || f.validation.empty()) throw ConfigError("every fold needs training and validation sequences");
    for (std::size_t i : f.train)
      if (i >= n) throw DimensionError("fold index out of range");
    for (std::size_t i : f.validation)
      if (i >= n) throw DimensionError("fold index out of range");
  }
  targets_ = one_hot_targets(data_);

  // Sequences with identical training-set membership across folds share one
  // accumulator; each fold's training accumulator is a merge of groups.
  std::vector<std::vector<bool>> membership(n, std::vector<bool>(folds_.size(), false));
  std::vector<bool> used(n, false);
  for (std::size_t f = 0; f < folds_.size(); ++f)
    for (std::size_t i : folds_[f].train) {
      membership[i][f] = true;
      used[i] = true;
    }
  std::map<std::vector<bool>, std::size_t> group_of;
  for (std::size_t i = 0; i < n; ++i) {
    if (!used[i]) continue;
    auto [it, inserted] = group_of.try_emplace(membership[i], groups_.size());
    if (inserted) groups_.emplace_back();
    groups_[it->second].push_back(i);
  }
  fold_groups_.resize(folds_.size());
  for (std::size_t g = 0; g < groups_.size(); ++g)
    for (std::size_t f = 0; f < folds_.size(); ++f)
      if (membership[groups_[g].front()][f]) fold_groups_[f].push_back(g);
}

std::vector<CvScore> CandidateEvaluator::evaluate_regularization(
    const HyperParams& hp, std::span<const double> regularization) const {
  const std::size_t n = data_.sequences.size();
  const std::size_t features = weights_.reservoir_size() + 1;
  const std::size_t outputs = data_.n_classes;
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<bool> needed(n, false);
  for (const auto& f : folds_) {
    for (std::size_t i : f.train) needed[i] = true;
    for (std::size_t i : f.validation) needed[i] = true;
  }
  std::vector<DenseMatrix> states(n);
  bool finite = true;
  for (std::size_t i = 0; i < n && finite; ++i) {
    if (!needed[i]) continue;
    states[i] = run_sequence(data_.sequences[i].features, weights_, hp);
    for (double v : states[i].values()) {
      if (!std::isfinite(v)) {
        finite = false;
        break;
      }
    }
  }
  if (!finite) {
    return std::vector<CvScore>(regularization.size(),
                                CvScore{std::vector<double>(folds_.size(), inf), inf});
  }

  std::vector<ReadoutAccumulator> group_acc(groups_.size(), ReadoutAccumulator(features, outputs));
  for (std::size_t g = 0; g < groups_.size(); ++g)
    for (std::size_t i : groups_[g]) group_acc[g].accumulate(states[i], targets_[i]);

  std::vector<ReadoutAccumulator> fold_acc;
  fold_acc.reserve(folds_.size());
  for (std::size_t f = 0; f < folds_.size(); ++f) {
    ReadoutAccumulator acc(features, outputs);
    for (std::size_t g : fold_groups_[f]) acc.merge(group_acc[g]);
    fold_acc.push_back(std::move(acc));
  }

  std::vector<CvScore> scores;
  scores.reserve(regularization.size());
  for (double eps : regularization) {
    CvScore score;
    score.fold_mse.reserve(folds_.size());
    for (std::size_t f = 0; f < folds_.size(); ++f) {
      const Readout readout = finalize(fold_acc[f], eps);
      double sum = 0.0;
      std::size_t count = 0;
      double seq_sum = 0.0;
      for (std::size_t i : folds_[f].validation) {
        const DenseMatrix y = predict(states[i], readout);
        const auto a = y.values();
        const auto b = targets_[i].values();
        double s = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
          const double e = a[j] - b[j];
          s += e * e;
        }
        sum += s;
        count += a.size();
        if (!a.empty()) seq_sum += s / static_cast<double>(a.size());
      }
      double fold_mse = 0.0;
      if (pooling_ == MsePooling::frames) {
        fold_mse = count == 0 ? 0.0 : sum / static_cast<double>(count);
      } else {
        fold_mse = seq_sum / static_cast<double>(folds_[f].validation.size());
      }
      if (!std::isfinite(fold_mse)) fold_mse = inf;
      score.fold_mse.push_back(fold_mse);
    }
    score.mean_mse = std::accumulate(score.fold_mse.begin(), score.fold_mse.end(), 0.0) /
                     static_cast<double>(score.fold_mse.size());
    scores.push_back(std::move(score));
  }
  return scores;
}

CvScore CandidateEvaluator::evaluate(const HyperParams& hp) const {
  const double eps = hp.regularization;
  return evaluate_regularization(hp, std::span<const double>(&eps, 1)).front();
}

double evaluate_candidate(const HyperParams& hp, const WeightSet& weights,
                          const SequenceDataset& data, const std::vector<Fold>& folds) {
  return CandidateEvaluator(data, weights, folds).evaluate(hp).mean_mse;
}

// ---------------------------------------------------------------------------
// Searches

namespace {

void validate_search_params(const std::vector<ParamSpec>& params) {
  for (const auto& p : params) p.dist.validate();
}

// Index of the first minimum; NaN never wins.
std::size_t argmin_mean(const std::vector<Candidate>& cs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cs.size(); ++i)
    if (cs[i].mean_mse < cs[best].mean_mse || std::isnan(cs[best].mean_mse)) best = i;
  return best;
}

void score_candidates(std::vector<Candidate>& batch, const CandidateEvaluator& evaluator,
                      std::size_t workers) {
  parallel_for(batch.size(), workers, [&](std::size_t i) {
    CvScore s = evaluator.evaluate(batch[i].params);
    batch[i].fold_mse = std::move(s.fold_mse);
    batch[i].mean_mse = s.mean_mse;
  });
}

bool only_regularization(const SearchStage& stage) {
  return !stage.params.empty() &&
         std::all_of(stage.params.begin(), stage.params.end(),
                     [](const ParamSpec& s) { return s.param == Param::regularization; });
}

}  // namespace

SearchTrace sequential_search(const std::vector<SearchStage>& stages, const HyperParams& defaults,
                              const CandidateEvaluator& evaluator, const SearchOptions& opts) {
  if (stages.empty()) throw ConfigError("sequential search needs at least one stage");
  std::vector<Param> seen;
  for (const auto& stage : stages) {
    if (stage.params.empty()) throw ConfigError("search stage without parameters");
    if (!stage.is_grid() && stage.iterations < 1) throw ConfigError("stage iterations must be >= 1");
    validate_search_params(stage.params);
    for (const auto& p : stage.params) {
      if (std::find(seen.begin(), seen.end(), p.param) != seen.end()) {
        throw ConfigError("parameter '" + std::string(to_string(p.param)) +
                          "' appears in more than one stage");
      }
      seen.push_back(p.param);
    }
  }
  defaults.validate();

  SearchTrace trace;
  HyperParams current = defaults;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const SearchStage& stage = stages[s];
    std::vector<Candidate> batch;
    if (stage.is_grid()) {
      // Cartesian product, first parameter varying slowest
      std::vector<std::vector<double>> axes;
      for (const auto& p : stage.params) axes.push_back(p.dist.grid_points());
      std::vector<std::size_t> idx(axes.size(), 0);
      for (std::size_t c = 0; c < stage.candidate_count(); ++c) {
        Candidate cand{current, {}, 0.0, s};
        for (std::size_t a = 0; a < axes.size(); ++a)
          set_param(cand.params, stage.params[a].param, axes[a][idx[a]]);
        batch.push_back(std::move(cand));
        for (std::size_t a = axes.size(); a-- > 0;) {
          if (++idx[a] < axes[a].size()) break;
          idx[a] = 0;
        }
      }
    } else {
      Rng rng = make_rng(opts.seed, kStreamStage + 1000 * s);
      for (std::size_t c = 0; c < stage.iterations; ++c) {
        Candidate cand{current, {}, 0.0, s};
        for (const auto& p : stage.params) set_param(cand.params, p.param, p.dist.sample(rng));
        batch.push_back(std::move(cand));
      }
    }
    for (const auto& c : batch) c.params.validate();

    if (only_regularization(stage)) {
      std::vector<double> eps;
      for (const auto& c : batch) eps.push_back(c.params.regularization);
      auto scores = evaluator.evaluate_regularization(current, eps);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        batch[i].fold_mse = std::move(scores[i].fold_mse);
        batch[i].mean_mse = scores[i].mean_mse;
      }
    } else {
      score_candidates(batch, evaluator, opts.workers);
    }

    for (auto& c : batch) trace.candidates.push_back(std::move(c));
    trace.best = argmin_mean(trace.candidates);
    // freeze this stage's parameters at the best values seen so far
    const HyperParams& best = trace.candidates[trace.best].params;
    for (const auto& p : stage.params) set_param(current, p.param, get_param(best, p.param));
  }
  return trace;
}

SearchTrace joint_random_search(const std::vector<ParamSpec>& space, std::size_t n,
                                const HyperParams& defaults, const CandidateEvaluator& evaluator,
                                const SearchOptions& opts) {
  if (n < 1) throw ConfigError("joint search needs at least one draw");
  if (space.empty()) throw ConfigError("joint search space is empty");
  validate_search_params(space);
  defaults.validate();

  Rng rng = make_rng(opts.seed, kStreamJoint);
  SearchTrace trace;
  trace.candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Candidate cand{defaults, {}, 0.0, 0};
    for (const auto& p : space) set_param(cand.params, p.param, p.dist.sample(rng));
    cand.params.validate();
    trace.candidates.push_back(std::move(cand));
  }
  score_candidates(trace.candidates, evaluator, opts.workers);
  trace.best = argmin_mean(trace.candidates);
  return trace;
}

std::vector<SearchStage> default_sequential_stages(double bias_upper, double input_scaling_low) {
  const auto bias_steps = static_cast<std::size_t>(std::llround(bias_upper / 0.1)) + 1;
  return {
      {{{Param::input_scaling, ParamDistribution::uniform(input_scaling_low, 1.0)},
        {Param::spectral_radius, ParamDistribution::uniform(0.0, 2.0)}},
       200},
      {{{Param::leakage, ParamDistribution::loguniform(1e-5, 1.0)}}, 50},
      {{{Param::bias_scaling, ParamDistribution::grid(0.0, bias_upper, bias_steps)}}, bias_steps},
      {{{Param::regularization, ParamDistribution::loguniform(1e-5, 10.0)}}, 50},
  };
}

std::vector<ParamSpec> default_joint_space(double input_scaling_low) {
  return {
      {Param::input_scaling, ParamDistribution::uniform(input_scaling_low, 1.0)},
      {Param::spectral_radius, ParamDistribution::uniform(0.0, 2.0)},
      {Param::leakage, ParamDistribution::loguniform(1e-5, 1.0)},
      {Param::bias_scaling, ParamDistribution::uniform(0.0, 2.0)},
      {Param::regularization, ParamDistribution::loguniform(1e-5, 10.0)},
  };
}

HyperParams search_defaults(HyperParams structure, TaskKind task) {
  structure.spectral_radius = 0.0;
  structure.bias_scaling = 0.0;
  structure.leakage = task == TaskKind::frame_level ? 1.0 : 0.1;
  return structure;
}

}  // namespace kmesn
