// One line per acceptance criterion; exit status 1 if any fails.
#include "support/helpers.hpp"

#include "srr/binary_io.hpp"
#include "srr/cli.hpp"
#include "srr/eval.hpp"
#include "srr/functional.hpp"
#include "srr/grad_check.hpp"
#include "srr/model_io.hpp"
#include "srr/synth.hpp"
#include "srr/trainer.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace srr;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
  std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!ok) ++failures;
}

template <class F>
void criterion(const std::string& name, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(false, name, std::string("threw ") + e.what());
  }
}

RankerConfig defaults_for(const Dataset& d) {
  RankerConfig c;
  c.input_dim = d.dim();
  return c;
}

ListScorer trained_scorer(const Dataset& train) {
  const RankerConfig c = defaults_for(train);
  const FitResult fit_result = fit(train, TrainConfig{}, c);
  return make_scorer(std::make_shared<const RankerModel>(RankerModel{c, fit_result.params}));
}

std::vector<double> orthogonal_to(std::span<const double> u, std::uint64_t seed) {
  std::vector<double> w = draw_direction(static_cast<std::uint32_t>(u.size()), seed);
  const double c = std::inner_product(w.begin(), w.end(), u.begin(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= c * u[i];
  const double n = std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0));
  for (double& x : w) x /= n;
  return w;
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

void gradient_check() {
  const auto t0 = Clock::now();
  const RankerConfig c = testing_support::small_config(8, 4, 2, 6);
  const auto p = testing_support::random_params<double>(c, 2024);
  Rng rng(2025);
  const Tensor2<double> e = testing_support::random_matrix<double>(4, 8, rng);
  const std::vector<std::uint8_t> labels{1, 0, 0};
  std::vector<NamedTensor<double>> params;
  p.for_each_block([&](std::string_view name, const Tensor2<double>& t) { params.push_back({std::string(name), t}); });
  const GradCheckReport r = grad_check(
      [&](Tape<double>& t, std::span<const Var> v) {
        return list_loss_on_tape(t, v, e, std::span<const std::uint8_t>(labels), c, Mode::Infer, nullptr);
      },
      params, 1e-6);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& b : r.blocks) {
    if (b.max_rel_error >= worst) {
      worst = b.max_rel_error;
      worst_name = b.name;
    }
  }
  const double secs = seconds_since(t0);
  report(worst < 1e-4 && secs < 5.0 && r.blocks.size() == RankerParameters<double>::kBlockCount,
         "gradient correctness",
         fmt::format("{} blocks, max rel error {:.3g} ({}), {:.2f} s (need < 1e-4, < 5 s)", r.blocks.size(), worst,
                     worst_name, secs));
}

void learnability() {
  const auto t0 = Clock::now();
  SyntheticSpec s;
  s.num_lists = 700;
  const SyntheticData data = generate(s);
  const DatasetSplit split = split_dataset(data.dataset, 500, s.seed);
  const double acc = pairwise_accuracy(trained_scorer(split.train), split.test);
  const double oracle = 100.0 * oracle_accuracy(split.test, data.direction);
  const double secs = seconds_since(t0);
  report(acc >= 95.0 && acc >= oracle - 3.0 && secs < 60.0, "synthetic learnability",
         fmt::format("test {} vs oracle {}, {:.1f} s (need >= 95.00, within 3 points, < 60 s)", format_percent(acc),
                     format_percent(oracle), secs));
}

void null_signal() {
  SyntheticSpec s;
  s.separation = 0.0;
  s.num_lists = 2500;
  const Dataset d = generate(s).dataset;
  const DatasetSplit split = split_dataset(d, 500, s.seed);
  const double acc = pairwise_accuracy(trained_scorer(split.train), split.test);
  report(acc >= 45.0 && acc <= 55.0, "null-signal sanity",
         fmt::format("test {} on {} lists (need [45, 55])", format_percent(acc), split.test.size()));
}

void cross_transfer() {
  SyntheticSpec a;
  a.num_lists = 700;
  a.direction_seed = 4242;
  SyntheticSpec b = a;
  b.seed = 1001;
  b.instruction_coupling = 1.0;
  const SyntheticData da = generate(a), db = generate(b);
  const DatasetSplit sa = split_dataset(da.dataset, 500, a.seed);
  const DatasetSplit sb = split_dataset(db.dataset, 500, b.seed);
  const ListScorer ma = trained_scorer(sa.train);
  const ListScorer mb = trained_scorer(sb.train);
  const CrossMatrix m = cross_matrix({{"A", ma}, {"B", mb}}, {{"A", &sa.test}, {"B", &sb.test}});
  const double shared = std::min(m.values[0][1], m.values[1][0]);

  // Orthogonal pair: same spec as A except the seed and a direction orthogonal to A's.
  SyntheticSpec c = a;
  c.seed = 2002;
  c.num_lists = 2500;
  const Dataset dc = generate(c, orthogonal_to(da.direction, 77));
  const DatasetSplit sc = split_dataset(dc, 500, c.seed);
  SyntheticSpec a_eval = a;
  a_eval.seed = 3003;
  a_eval.num_lists = 2000;
  const Dataset da_eval = generate(a_eval, da.direction);
  const CrossMatrix o = cross_matrix({{"A", ma}, {"C", trained_scorer(sc.train)}}, {{"A", &da_eval}, {"C", &sc.test}});
  const double orth_dev = std::max(std::abs(o.values[0][1] - 50.0), std::abs(o.values[1][0] - 50.0));

  report(shared >= 85.0 && orth_dev <= 5.0, "cross-dataset transfer",
         fmt::format("shared direction A->B {}, B->A {} (need >= 85.00); orthogonal A->C {}, C->A {} on 2000 lists "
                     "(need 50 +/- 5)",
                     format_percent(m.values[0][1]), format_percent(m.values[1][0]), format_percent(o.values[0][1]),
                     format_percent(o.values[1][0])));
}

void permutation_equivariance() {
  RankerConfig c;
  c.input_dim = 32;
  Rng init(31);
  const auto p = RankerParameters<float>::initialize(c, init);
  Rng rng(32);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng.below(15);
    const Tensor2<float> e = testing_support::random_matrix<float>(static_cast<Eigen::Index>(m + 1), 32, rng);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(perm));
    Tensor2<float> ep = e;
    for (std::size_t i = 0; i < m; ++i) ep.row(static_cast<Eigen::Index>(i + 1)) = e.row(static_cast<Eigen::Index>(perm[i] + 1));
    const auto s = score_list(e, p, c).scores.scores;
    const auto sp = score_list(ep, p, c).scores.scores;
    for (std::size_t i = 0; i < m; ++i) worst = std::max(worst, std::abs(sp[i] - s[perm[i]]));
  }
  report(worst == 0.0, "permutation equivariance", fmt::format("max abs deviation {:.3g} over 100 lists (need 0)", worst));
}

void determinism() {
  testing_support::TempDir dir("acceptance-determinism");
  const auto path = [&](const std::string& n) { return (dir / n).string(); };
  write_file(path("spec.json"), R"({"num_lists": 200})");
  write_file(path("config.json"), R"({"train": {"epochs": 5}})");
  bool ok = cli({"synth", "--spec", path("spec.json"), "--out", path("d.srrf"), "--train-lists", "150"}) == 0;
  for (const char* run : {"r1", "r2"}) {
    ok = ok && cli({"train", "--data", path("d.train.srrf"), "--config", path("config.json"), "--out", path(run),
                    "--seed", "13"}) == 0;
  }
  const bool same_model = ok && read_file(path("r1/model.srrm")) == read_file(path("r2/model.srrm"));
  for (const char* report_file : {"e1.jsonl", "e2.jsonl"}) {
    ok = ok && cli({"eval", "--model", path("r1/model.srrm"), "--data", path("d.test.srrf"), "--report",
                    path(report_file), "--seed", "13"}) == 0;
  }
  const bool same_report = ok && read_file(path("e1.jsonl")) == read_file(path("e2.jsonl"));
  report(ok && same_model && same_report, "determinism",
         fmt::format("commands ok: {}, identical SRRM: {}, identical reports: {}", ok, same_model, same_report));
}

void round_trips() {
  Rng rng(77);
  std::size_t srrf_ok = 0, srrm_ok = 0;
  testing_support::TempDir dir("acceptance-io");
  for (int i = 0; i < 1000; ++i) {
    const std::uint32_t d = 1 + static_cast<std::uint32_t>(rng.below(12));
    Dataset data(d, make_source_tag(fmt::format("case-{}", i)));
    const std::size_t lists = rng.below(6);
    for (std::size_t l = 0; l < lists; ++l) data.add(testing_support::random_list(rng.next_u64(), 1 + rng.below(6), d, rng));
    write_dataset(data, dir / "a.srrf");
    write_dataset(read_dataset(dir / "a.srrf"), dir / "b.srrf");
    srrf_ok += read_file(dir / "a.srrf") == read_file(dir / "b.srrf") ? 1 : 0;

    const std::uint32_t heads = 1 + static_cast<std::uint32_t>(rng.below(3));
    RankerConfig c = testing_support::small_config(d, heads * (1 + static_cast<std::uint32_t>(rng.below(3))), heads,
                                                   1 + static_cast<std::uint32_t>(rng.below(8)));
    c.temperature = 0.05 + rng.uniform();
    const RankerModel m{c, testing_support::random_params<float>(c, rng.next_u64())};
    save_model(m, dir / "a.srrm");
    save_model(load_model(dir / "a.srrm"), dir / "b.srrm");
    srrm_ok += read_file(dir / "a.srrm") == read_file(dir / "b.srrm") ? 1 : 0;
  }
  report(srrf_ok == 1000 && srrm_ok == 1000, "format round trips",
         fmt::format("SRRF {}/1000, SRRM {}/1000 byte-identical", srrf_ok, srrm_ok));
}

void parameter_budget() {
  const RankerConfig c;
  const std::size_t n = parameter_count(c);
  report(c.input_dim == 4096 && n < 5'000'000, "parameter budget",
         fmt::format("{} trainable parameters at d={} (need < 5,000,000)", n, c.input_dim));
}

void loss_properties() {
  Rng rng(99);
  std::size_t bad_target = 0, bad_softmax = 0, bad_kl = 0;
  double worst_self = 0.0, min_kl = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t m = 1 + rng.below(64);
    std::vector<std::uint8_t> labels(m, 0);
    labels[rng.below(m)] = 1;
    for (auto& y : labels)
      if (rng.uniform() < 0.3) y = 1;
    const std::size_t k = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
    const TargetDistribution t = build_target(labels);
    double mass = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      mass += t.p_star[j];
      if (t.p_star[j] != (labels[j] ? 1.0 / static_cast<double>(k) : 0.0)) ++bad_target;
    }
    if (t.k != k || std::abs(mass - 1.0) > 1e-12) ++bad_target;

    std::vector<double> s(m);
    for (double& v : s) v = 2.0 * rng.uniform() - 1.0;
    const double tau = 0.01 + rng.uniform();
    const std::vector<double> p = softmax_temp<double>(s, tau);
    const double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-12 || *std::min_element(p.begin(), p.end()) <= 0.0) ++bad_softmax;

    const double kl = kl_divergence<double>(t.p_star, p);
    min_kl = std::min(min_kl, kl);
    if (kl < 0.0) ++bad_kl;
    worst_self = std::max(worst_self, std::abs(kl_divergence<double>(p, p)));
  }
  report(bad_target == 0 && bad_softmax == 0 && bad_kl == 0 && worst_self == 0.0, "loss/target properties",
         fmt::format("10000 cases: target errors {}, softmax errors {}, negative KL {} (min {:.3g}), max |KL(p,p)| {:.3g}",
                     bad_target, bad_softmax, bad_kl, min_kl, worst_self));
}

}  // namespace

int main() {
  criterion("gradient correctness", gradient_check);
  criterion("synthetic learnability", learnability);
  criterion("null-signal sanity", null_signal);
  criterion("cross-dataset transfer", cross_transfer);
  criterion("permutation equivariance", permutation_equivariance);
  criterion("determinism", determinism);
  criterion("format round trips", round_trips);
  criterion("parameter budget", parameter_budget);
  criterion("loss/target properties", loss_properties);
  std::cout << (failures == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
