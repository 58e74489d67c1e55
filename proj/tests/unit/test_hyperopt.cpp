#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "kmesn/data.hpp"
#include "kmesn/errors.hpp"
#include "kmesn/hyperopt.hpp"
#include "kmesn/synthetic.hpp"

using namespace kmesn;

namespace {

SequenceDataset toy_data(std::size_t sequences = 30) {
  MarkovTaskConfig cfg;
  cfg.prototypes = 3;
  cfg.dim = 4;
  cfg.classes = 3;
  cfg.length = 8;
  cfg.train_sequences = sequences;
  cfg.test_sequences = 1;
  cfg.seed = 5;
  return make_markov_task(cfg).train;
}

HyperParams toy_hp(std::size_t n_res = 12) {
  HyperParams hp;
  hp.reservoir_size = n_res;
  hp.input_dim = 4;
  hp.output_dim = 3;
  hp.input_fanin = 2;
  hp.recurrent_fanin = 3;
  hp.spectral_radius = 0.5;
  return hp;
}

double fold_mse_by_hand(const SequenceDataset& data, const WeightSet& w, const HyperParams& hp,
                        const Fold& fold) {
  const auto targets = one_hot_targets(data);
  ReadoutAccumulator acc(w.reservoir_size() + 1, data.n_classes);
  for (std::size_t i : fold.train) acc.accumulate(run_sequence(data.sequences[i].features, w, hp), targets[i]);
  const Readout r = finalize(acc, hp.regularization);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i : fold.validation) {
    const DenseMatrix y = predict(run_sequence(data.sequences[i].features, w, hp), r);
    sum += mse(y, targets[i]) * static_cast<double>(y.values().size());
    count += y.values().size();
  }
  return sum / static_cast<double>(count);
}

}  // namespace

TEST_CASE("parameter names") {
  for (Param p : kSearchParams) CHECK(parse_param(to_string(p)) == p);
  CHECK_THROWS_AS(parse_param("momentum"), ConfigError);
  HyperParams hp;
  set_param(hp, Param::leakage, 0.25);
  CHECK(get_param(hp, Param::leakage) == 0.25);
  CHECK(hp.leakage == 0.25);
}

TEST_CASE("distributions") {
  SUBCASE("validation") {
    CHECK_NOTHROW(ParamDistribution::uniform(0.5, 0.5).validate());
    CHECK_THROWS_AS(ParamDistribution::uniform(1.0, 0.5).validate(), ConfigError);
    CHECK_THROWS_AS(ParamDistribution::loguniform(0.0, 1.0).validate(), ConfigError);
    CHECK_THROWS_AS(ParamDistribution::grid(0.0, 1.0, 0).validate(), ConfigError);
    CHECK_THROWS_AS(ParamDistribution::uniform(0.0, INFINITY).validate(), ConfigError);
  }
  SUBCASE("samples stay in bounds") {
    Rng rng = make_rng(1, 0);
    for (const auto& d : {ParamDistribution::uniform(1e-3, 1.0), ParamDistribution::loguniform(1e-5, 10.0),
                          ParamDistribution::grid(0.0, 2.0, 21)}) {
      for (int i = 0; i < 2000; ++i) CHECK(d.contains(d.sample(rng)));
    }
  }
  SUBCASE("loguniform median sits at the log midpoint") {
    double avg_log_median = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng = make_rng(seed, 7);
      const auto d = ParamDistribution::loguniform(1e-5, 1.0);
      std::vector<double> xs(10000);
      for (double& x : xs) x = d.sample(rng);
      std::nth_element(xs.begin(), xs.begin() + 5000, xs.end());
      avg_log_median += std::log10(xs[5000]) / 5.0;
    }
    CHECK(avg_log_median > -2.7);
    CHECK(avg_log_median < -2.3);
  }
  SUBCASE("grid points") {
    const auto pts = ParamDistribution::grid(0.0, 2.0, 21).grid_points();
    REQUIRE(pts.size() == 21);
    CHECK(pts.front() == 0.0);
    CHECK(pts[1] == doctest::Approx(0.1));
    CHECK(pts.back() == 2.0);
    CHECK(ParamDistribution::grid(0.3, 0.3, 1).grid_points() == std::vector<double>{0.3});
  }
  SUBCASE("kind names") {
    CHECK(parse_distribution_kind("loguniform") == ParamDistribution::Kind::loguniform);
    CHECK_THROWS_AS(parse_distribution_kind("normal"), ConfigError);
  }
}

TEST_CASE("default search spaces") {
  const auto stages = default_sequential_stages();
  REQUIRE(stages.size() == 4);
  std::size_t total = 0;
  for (const auto& s : stages) total += s.candidate_count();
  CHECK(total == 321);
  CHECK(stages[0].candidate_count() == 200);
  CHECK(stages[2].is_grid());
  CHECK(stages[2].candidate_count() == 21);
  CHECK(default_sequential_stages(1.0)[2].candidate_count() == 11);
  const auto joint = default_joint_space();
  CHECK(joint.size() == 5);
  for (const auto& p : joint) CHECK_NOTHROW(p.dist.validate());

  HyperParams hp = toy_hp();
  hp.bias_scaling = 0.7;
  const HyperParams frame = search_defaults(hp, TaskKind::frame_level);
  const HyperParams seq = search_defaults(hp, TaskKind::sequence_level);
  CHECK(frame.spectral_radius == 0.0);
  CHECK(frame.bias_scaling == 0.0);
  CHECK(frame.leakage == 1.0);
  CHECK(seq.leakage == 0.1);
  CHECK(seq.reservoir_size == hp.reservoir_size);
}

TEST_CASE("kfold_split") {
  SUBCASE("10 sequences into 5 folds") {
    const auto folds = kfold_split(10, {5, 3});
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> seen;
    for (const auto& f : folds) {
      CHECK(f.validation.size() == 2);
      CHECK(f.train.size() == 8);
      for (std::size_t i : f.validation) CHECK(seen.insert(i).second);
      for (std::size_t i : f.train) CHECK(std::find(f.validation.begin(), f.validation.end(), i) == f.validation.end());
    }
    CHECK(seen.size() == 10);
  }
  SUBCASE("uneven sizes and exhaustive cover") {
    for (std::size_t n : {3u, 7u, 11u, 23u}) {
      const auto folds = kfold_split(n, {3, n});
      std::vector<int> hits(n, 0);
      std::size_t lo = n, hi = 0;
      for (const auto& f : folds) {
        lo = std::min(lo, f.validation.size());
        hi = std::max(hi, f.validation.size());
        for (std::size_t i : f.validation) ++hits[i];
        CHECK(f.train.size() + f.validation.size() == n);
      }
      CHECK(hi - lo <= 1);
      for (int h : hits) CHECK(h == 1);
    }
  }
  SUBCASE("deterministic and seed dependent") {
    const auto a = kfold_split(20, {5, 1});
    const auto b = kfold_split(20, {5, 1});
    const auto c = kfold_split(20, {5, 2});
    bool same = true, differ = false;
    for (std::size_t f = 0; f < 5; ++f) {
      same = same && a[f].validation == b[f].validation;
      differ = differ || a[f].validation != c[f].validation;
    }
    CHECK(same);
    CHECK(differ);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(kfold_split(4, {5, 0}), ConfigError);
    CHECK_THROWS_AS(kfold_split(10, {1, 0}), ConfigError);
  }
}

TEST_CASE("candidate evaluation") {
  const SequenceDataset data = toy_data();
  const HyperParams hp = toy_hp();
  const WeightSet w = init_random_weights(hp, 4);
  const auto folds = kfold_split(data.sequences.size(), {3, 9});

  SUBCASE("exact fit when training and validation coincide") {
    SequenceDataset two = data.subset(std::vector<std::size_t>{0, 1});
    HyperParams big = toy_hp(40);
    big.input_scaling = 1.0;
    big.regularization = 1e-6;
    const WeightSet wb = init_random_weights(big, 2);
    const std::vector<Fold> same{{{0, 1}, {0, 1}}};
    CHECK(CandidateEvaluator(two, wb, same).evaluate(big).mean_mse < 1e-6);
  }
  SUBCASE("recurrent scaling is inert without recurrent weights") {
    WeightSet no_rec = w;
    no_rec.w_res = SparseMatrix(hp.reservoir_size, hp.reservoir_size);
    HyperParams a = hp, b = hp;
    a.spectral_radius = 0.1;
    b.spectral_radius = 1.7;
    const CandidateEvaluator ev(data, no_rec, folds);
    CHECK(ev.evaluate(a).mean_mse == ev.evaluate(b).mean_mse);
  }
  SUBCASE("per-fold scores match an independent recomputation") {
    const CvScore s = CandidateEvaluator(data, w, folds).evaluate(hp);
    REQUIRE(s.fold_mse.size() == 3);
    double total = 0.0;
    for (std::size_t f = 0; f < 3; ++f) {
      const double expect = fold_mse_by_hand(data, w, hp, folds[f]);
      CHECK(std::abs(s.fold_mse[f] - expect) <= 1e-10 * expect);
      total += s.fold_mse[f];
    }
    CHECK(s.mean_mse == doctest::Approx(total / 3.0).epsilon(1e-14));
    CHECK(evaluate_candidate(hp, w, data, folds) == s.mean_mse);
  }
  SUBCASE("frame and sequence pooling agree for equal lengths") {
    const double a = CandidateEvaluator(data, w, folds, MsePooling::frames).evaluate(hp).mean_mse;
    const double b = CandidateEvaluator(data, w, folds, MsePooling::sequences).evaluate(hp).mean_mse;
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  SUBCASE("regularization sweep matches single evaluations") {
    const CandidateEvaluator ev(data, w, folds);
    const std::vector<double> eps{1e-4, 0.1, 3.0};
    const auto scores = ev.evaluate_regularization(hp, eps);
    for (std::size_t i = 0; i < eps.size(); ++i) {
      HyperParams h = hp;
      h.regularization = eps[i];
      CHECK(scores[i].mean_mse == ev.evaluate(h).mean_mse);
    }
  }
  SUBCASE("diverging states score infinity") {
    SequenceDataset longer;
    longer.n_classes = 2;
    longer.task = TaskKind::sequence_level;
    for (std::size_t s = 0; s < 4; ++s) {
      DenseMatrix f(1500, 4);
      for (double& v : f.values()) v = 0.5;
      longer.sequences.push_back({static_cast<std::int64_t>(s), f, {s % 2}});
    }
    HyperParams wild = hp;
    wild.activation = Activation::identity;
    wild.spectral_radius = 2.0;
    const CvScore s = CandidateEvaluator(longer, w, kfold_split(4, {2, 0})).evaluate(wild);
    CHECK(std::isinf(s.mean_mse));
  }
  SUBCASE("construction errors") {
    CHECK_THROWS_AS(CandidateEvaluator(SequenceDataset{}, w, folds), DegenerateInput);
    CHECK_THROWS_AS(CandidateEvaluator(data, w, {}), ConfigError);
    CHECK_THROWS_AS(CandidateEvaluator(data, w, {{{0}, {999}}}), DimensionError);
    const WeightSet wrong_inputs{SparseMatrix(12, 5), w.w_res, w.w_bias, InputInit::random};
    CHECK_THROWS_AS(CandidateEvaluator(data, wrong_inputs, folds), DimensionError);
  }
}

TEST_CASE("sequential search") {
  const SequenceDataset data = toy_data();
  const HyperParams structure = toy_hp();
  const WeightSet w = init_random_weights(structure, 6);
  const CandidateEvaluator ev(data, w, kfold_split(data.sequences.size(), {3, 1}));
  const HyperParams defaults = search_defaults(structure, TaskKind::sequence_level);

  SUBCASE("default stages evaluate 321 candidates") {
    const SearchTrace t = sequential_search(default_sequential_stages(), defaults, ev, {1, 1});
    CHECK(t.candidates.size() == 321);

    // best attains the minimum, earliest on ties
    double lo = INFINITY;
    std::size_t first = 0;
    for (std::size_t i = 0; i < t.candidates.size(); ++i)
      if (t.candidates[i].mean_mse < lo) {
        lo = t.candidates[i].mean_mse;
        first = i;
      }
    CHECK(t.best == first);

    // every candidate lies inside its stage's bounds; earlier stages stay frozen
    const auto stages = default_sequential_stages();
    std::size_t offset = 0;
    for (std::size_t s = 0; s < stages.size(); ++s) {
      const std::size_t count = stages[s].candidate_count();
      for (std::size_t i = offset; i < offset + count; ++i) {
        const Candidate& c = t.candidates[i];
        CHECK(c.stage == s);
        for (const auto& p : stages[s].params) CHECK(p.dist.contains(get_param(c.params, p.param)));
        for (std::size_t earlier = 0; earlier < s; ++earlier)
          for (const auto& p : stages[earlier].params)
            CHECK(get_param(c.params, p.param) == get_param(t.candidates[offset].params, p.param));
      }
      offset += count;
    }

    // never worse than the all-defaults starting point
    CHECK(t.best_candidate().mean_mse <= ev.evaluate(defaults).mean_mse);
  }
  SUBCASE("degenerate distributions give one point per stage") {
    const std::vector<SearchStage> stages{
        {{{Param::input_scaling, ParamDistribution::uniform(0.3, 0.3)},
          {Param::spectral_radius, ParamDistribution::uniform(0.4, 0.4)}},
         1},
        {{{Param::leakage, ParamDistribution::loguniform(0.5, 0.5)}}, 1},
        {{{Param::bias_scaling, ParamDistribution::grid(0.2, 0.2, 1)}}, 1},
        {{{Param::regularization, ParamDistribution::loguniform(0.01, 0.01)}}, 1},
    };
    const SearchTrace t = sequential_search(stages, defaults, ev, {0, 1});
    REQUIRE(t.candidates.size() == 4);
    CHECK(t.candidates[0].params.input_scaling == 0.3);
    CHECK(t.candidates[0].params.spectral_radius == 0.4);
    CHECK(t.candidates[1].params.leakage == 0.5);
    CHECK(t.candidates[2].params.bias_scaling == 0.2);
    CHECK(t.candidates[3].params.regularization == 0.01);
    for (std::size_t s = 0; s < 4; ++s) CHECK(t.candidates[s].stage == s);
  }
  SUBCASE("reproducible and independent of the worker count") {
    std::vector<SearchStage> stages = default_sequential_stages();
    stages[0].iterations = 12;
    stages[1].iterations = 6;
    stages[3].iterations = 6;
    const SearchTrace a = sequential_search(stages, defaults, ev, {3, 1});
    const SearchTrace b = sequential_search(stages, defaults, ev, {3, 3});
    REQUIRE(a.candidates.size() == b.candidates.size());
    for (std::size_t i = 0; i < a.candidates.size(); ++i) {
      CHECK(a.candidates[i].params == b.candidates[i].params);
      CHECK(a.candidates[i].fold_mse == b.candidates[i].fold_mse);
    }
    CHECK(a.best == b.best);
  }
  SUBCASE("configuration errors") {
    CHECK_THROWS_AS(sequential_search({}, defaults, ev, {}), ConfigError);
    const std::vector<SearchStage> twice{{{{Param::leakage, ParamDistribution::uniform(0.1, 1)}}, 2},
                                         {{{Param::leakage, ParamDistribution::uniform(0.1, 1)}}, 2}};
    CHECK_THROWS_AS(sequential_search(twice, defaults, ev, {}), ConfigError);
    const std::vector<SearchStage> bad{{{{Param::leakage, ParamDistribution::uniform(1, 0.1)}}, 2}};
    CHECK_THROWS_AS(sequential_search(bad, defaults, ev, {}), ConfigError);
  }
}

TEST_CASE("joint random search") {
  const SequenceDataset data = toy_data();
  const HyperParams structure = toy_hp();
  const CandidateEvaluator ev(data, init_random_weights(structure, 6),
                              kfold_split(data.sequences.size(), {3, 1}));
  const HyperParams defaults = search_defaults(structure, TaskKind::sequence_level);
  const auto space = default_joint_space();

  SUBCASE("single draw is the best") {
    const SearchTrace t = joint_random_search(space, 1, defaults, ev, {2, 1});
    CHECK(t.candidates.size() == 1);
    CHECK(t.best == 0);
  }
  SUBCASE("draws are reproducible and in bounds") {
    const SearchTrace a = joint_random_search(space, 25, defaults, ev, {4, 1});
    const SearchTrace b = joint_random_search(space, 25, defaults, ev, {4, 2});
    REQUIRE(a.candidates.size() == 25);
    for (std::size_t i = 0; i < 25; ++i) {
      CHECK(a.candidates[i].params == b.candidates[i].params);
      CHECK(a.candidates[i].mean_mse == b.candidates[i].mean_mse);
      for (const auto& p : space) CHECK(p.dist.contains(get_param(a.candidates[i].params, p.param)));
      CHECK(a.candidates[a.best].mean_mse <= a.candidates[i].mean_mse);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(joint_random_search(space, 0, defaults, ev, {}), ConfigError);
    CHECK_THROWS_AS(joint_random_search({}, 3, defaults, ev, {}), ConfigError);
  }
}
