// Acceptance run: one PASS/FAIL line per criterion, each with its runtime
// budget. Exit status is 0 when every criterion passes except those named
// with --known-red.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tbnorm/experiments.hpp"
#include "tbnorm/gradcheck.hpp"
#include "tbnorm/metrics.hpp"
#include "tbnorm/norm.hpp"

using namespace tbnorm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Tensor random_tensor(Shape s, Rng& rng) {
  Tensor t(s);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return a.size() == b.size() ? m : INFINITY;
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
  struct Case {
    NormKind kind;
    Shape shape;
    std::size_t task, bc, bp;
  };
  std::vector<Case> cases;
  for (NormKind k : {NormKind::bn, NormKind::gn, NormKind::cn}) {
    cases.push_back({k, {12, 6, 3, 3}, 1, 0, 0});
    cases.push_back({k, {5, 4, 2, 2}, 1, 0, 0});
  }
  // A two-value group normalizes to +-1 up to epsilon, leaving an input
  // gradient at rounding level; only BN gets the 1x1 spatial shape.
  cases.push_back({NormKind::bn, {5, 4, 1, 1}, 1, 0, 0});
  cases.push_back({NormKind::tbbn, {12, 6, 3, 3}, 3, 8, 4});
  cases.push_back({NormKind::tbbn, {12, 6, 3, 3}, 2, 8, 4});
  cases.push_back({NormKind::tbbn, {12, 4, 1, 1}, 3, 8, 4});

  double worst = 0.0;
  std::string worst_at;
  std::size_t checks = 0;
  for (const auto& c : cases) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      LayerCheckSpec spec;
      spec.layer = c.kind;
      spec.shape = c.shape;
      spec.task = c.task;
      spec.current = c.bc;
      spec.exemplar = c.bp;
      spec.groups = 2;
      spec.seed = seed;
      spec.step = 1e-5;
      spec.threshold = 1e-4;
      const auto rep = check_layer(spec);
      ++checks;
      for (const auto& b : rep.blocks) {
        if (b.max_rel_error > worst) {
          worst = b.max_rel_error;
          worst_at = to_string(c.kind) + "/" + b.name;
        }
      }
    }
  }
  std::size_t r3 = 0;
  {
    NormLayerState st(6);
    Rng rng(1);
    auto [y, cache] = tbbn_forward_train(random_tensor({12, 6, 3, 3}, rng), {8, 4, 3}, st);
    r3 = cache.split_factor();
  }
  return {worst < 1e-4, std::to_string(checks) + " layer checks, max rel err " +
                            fmt("%.2e", worst) + " (" + worst_at +
                            "); TBBN t=3 8:4 used r*=" + std::to_string(r3)};
}

Outcome degeneration_suite() {
  double worst = 0.0;
  bool eval_exact = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const Tensor x = random_tensor({12, 6, 3, 3}, rng);
    const Tensor dy = random_tensor({12, 6, 3, 3}, rng);
    NormLayerState base(6);
    for (std::size_t c = 0; c < 6; ++c) {
      base.gamma[c] = rng.normal(1.0, 0.3);
      base.beta[c] = rng.normal(0.0, 0.3);
    }

    NormLayerState bn_state = base;
    auto [ybn, bcache] = bn_forward_train(x, bn_state);
    const auto gbn = bn_backward(dy, bcache, bn_state);

    auto compare = [&](const BatchComposition& comp, AblationFlags flags) {
      NormLayerState st = base;
      st.ablation = flags;
      auto [y, cache] = tbbn_forward_train(x, comp, st);
      const auto g = tbbn_backward(dy, cache, st);
      for (double d : {max_abs_diff(y.data(), ybn.data()), max_abs_diff(g.dx.data(), gbn.dx.data()),
                       max_abs_diff(g.dgamma, gbn.dgamma), max_abs_diff(g.dbeta, gbn.dbeta),
                       max_abs_diff(st.running_mean, bn_state.running_mean),
                       max_abs_diff(st.running_var, bn_state.running_var)}) {
        worst = std::max(worst, d);
      }
    };
    compare({12, 0, 1}, AblationFlags::full());
    compare({8, 4, 3}, AblationFlags::vanilla());

    NormLayerState ev = base;
    for (std::size_t c = 0; c < 6; ++c) {
      ev.running_mean[c] = rng.normal();
      ev.running_var[c] = rng.uniform(0.5, 2.0);
    }
    const Tensor a = bn_forward_eval(x, ev);
    const Tensor b = tbbn_forward_eval(x, ev);
    eval_exact &= std::equal(a.data().begin(), a.data().end(), b.data().begin());
  }
  return {worst <= 1e-12 && eval_exact,
          "max |TBBN - BN| " + fmt("%.2e", worst) + " over t=1 and all-false flags; eval " +
              (eval_exact ? "bit-exact" : "differs")};
}

Outcome split_table() {
  const std::size_t bc = 48, bp = 16;
  std::ostringstream row;
  bool ok = true;
  for (std::size_t t = 1; t <= 10; ++t) {
    const std::size_t r = t == 1 ? 1 : bc * (t - 1) / bp;
    std::size_t oracle = 1;
    for (std::size_t d = 1; d <= std::min({r, bc, bp}); ++d) {
      if (bc % d == 0 && bp % d == 0) oracle = d;
    }
    const std::size_t got_r = compute_r(bc, bp, t);
    const std::size_t got = feasible_r(bc, bp, got_r);
    ok &= got_r == r && got == oracle;
    row << " t" << t << "=" << got;
  }
  ok &= feasible_r(bc, bp, compute_r(bc, bp, 2)) == 2;
  ok &= feasible_r(bc, bp, compute_r(bc, bp, 5)) == 8;
  ok &= feasible_r(bc, bp, compute_r(bc, bp, 9)) == 16;
  return {ok, "r* for 48:16:" + row.str()};
}

Outcome statistics_bias() {
  const auto row = measure_bn_mean_gap(48, 16, 4, 100000, 7);
  const double rel = std::abs(row.measured - row.derived) / std::abs(row.derived);
  bool zeros = true;
  for (std::size_t t : {2, 4, 8}) {
    std::vector<std::vector<double>> means;
    for (std::size_t i = 1; i <= t; ++i) means.push_back({static_cast<double>(i)});
    zeros &= expected_bn_mean_bias(means, 64 / t, 64 - 64 / t, t).derived[0] == 0.0;
  }
  return {rel <= 0.05 && zeros,
          "derived " + fmt("%.4f", row.derived) + ", measured " + fmt("%.4f", row.measured) +
              " (rel " + fmt("%.2e", rel) + "), printed form " + fmt("%.4f", row.printed) +
              "; zero at B_c=B/t for t=2,4,8: " + (zeros ? "yes" : "no")};
}

Outcome toy() {
  bool ok = true;
  std::ostringstream s;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    ToyOptions opt;
    opt.batches = 2000;
    opt.seed = seed;
    const auto r = exp_toy_gaussian(opt);
    ok &= r.tbbn_better_dims >= 18;
    s << (seed > 1 ? ", " : "") << "seed " << seed << ": " << r.tbbn_better_dims << "/20";
  }
  return {ok, "dims where TBBN beats BN: " + s.str()};
}

Outcome metrics() {
  AccuracyMatrix a;
  a.append_row({0.9});
  a.append_row({0.8, 0.7});
  a.append_row({0.6, 0.5, 0.8});
  const double af = final_accuracy(a), aa = average_accuracy(a), f = forgetting(a),
               al = learning_accuracy(a);
  const bool ok = std::abs(af - 0.6333) <= 1e-4 && std::abs(aa - 0.7611) <= 1e-4 &&
                  std::abs(f - 0.1667) <= 1e-4 && std::abs(al - 0.8) <= 1e-4;
  return {ok, "A_f " + fmt("%.4f", af) + ", A_a " + fmt("%.4f", aa) + ", F " + fmt("%.4f", f) +
                  ", A_l " + fmt("%.4f", al)};
}

RunConfig desk_config(NormKind norm) {
  RunConfig cfg;
  cfg.train.norm = norm;
  cfg.seeds = {1, 2, 3};
  return cfg;
}

struct CilPair {
  CilReport bn, tbbn;
};

Outcome desk_cil(CilPair& runs) {
  runs.bn = exp_cil_run(desk_config(NormKind::bn));
  runs.tbbn = exp_cil_run(desk_config(NormKind::tbbn));
  const auto& b = runs.bn.mean;
  const auto& t = runs.tbbn.mean;
  return {t.final_accuracy >= b.final_accuracy && t.forgetting <= b.forgetting,
          "A_f TBBN " + fmt("%.4f", t.final_accuracy) + " vs BN " + fmt("%.4f", b.final_accuracy) +
              ", F TBBN " + fmt("%.4f", t.forgetting) + " vs BN " + fmt("%.4f", b.forgetting)};
}

Outcome ablation() {
  const auto rows = exp_ablation(desk_config(NormKind::tbbn));
  const AblationRow* full = nullptr;
  const AblationRow* case2 = nullptr;
  for (const auto& r : rows) {
    if (r.name == "TBBN") full = &r;
    if (r.name == "Case 2") case2 = &r;
  }
  if (!full || !case2) return {false, "ablation rows missing"};
  const double chance = full->report.chance;
  const bool collapse = case2->report.mean.final_accuracy <= 2.0 * chance;
  bool dominates = true;
  std::ostringstream s;
  for (const auto& r : rows) {
    s << r.name << " " << fmt("%.4f", r.report.mean.final_accuracy) << "; ";
    if (r.name.starts_with("Case")) {
      dominates &= full->report.mean.final_accuracy >= r.report.mean.final_accuracy;
    }
  }
  return {collapse && dominates,
          "A_f " + s.str() + "Case 2 <= 2x chance (" + fmt("%.2f", 2.0 * chance) + "): " +
              (collapse ? "yes" : "no") + "; TBBN >= Cases 1-4: " + (dominates ? "yes" : "no")};
}

Outcome oracle() {
  const auto rep = exp_oracle(desk_config(NormKind::bn));
  bool every_seed = true;
  for (const auto& s : rep.runs) every_seed &= mean_of(s.stats_affine) > mean_of(s.stats_only);
  return {every_seed && rep.stats_affine > rep.stats_only,
          "average accuracy FT " + fmt("%.4f", rep.ft) + ", stats-only " +
              fmt("%.4f", rep.stats_only) + ", stats+affine " + fmt("%.4f", rep.stats_affine) +
              ", joint " + fmt("%.4f", rep.joint) +
              (every_seed ? "; holds on every seed" : "; fails on some seed")};
}

Outcome taxonomy(const CilPair& runs) {
  const auto& b = runs.bn.total;
  const auto& t = runs.tbbn.total;
  const bool largest = b.p_to_c > b.c_to_p && b.p_to_c > b.c_to_c && b.p_to_c > b.p_to_p;
  return {largest && t.p_to_c < b.p_to_c,
          "BN P->C " + std::to_string(b.p_to_c) + ", P->P " + std::to_string(b.p_to_p) + ", C->P " +
              std::to_string(b.c_to_p) + ", C->C " + std::to_string(b.c_to_c) + "; TBBN P->C " +
              std::to_string(t.p_to_c)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> known_red;
  app.add_option("--known-red", known_red,
                 "Criteria whose FAIL is expected and does not change the exit status");
  CLI11_PARSE(app, argc, argv);

  CilPair cil;
  struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", 30, gradient_suite},
      {2, "degeneration suite", 5, degeneration_suite},
      {3, "split factor table", 1, split_table},
      {4, "statistics bias", 60, statistics_bias},
      {5, "gaussian toy", 60, toy},
      {6, "metrics", 1, metrics},
      {7, "desk-scale CIL", 600, [&] { return desk_cil(cil); }},
      {8, "ablation direction", 1200, ablation},
      {9, "oracle direction", 600, oracle},
      // Reuses the runs of criterion 7.
      {10, "taxonomy direction", 600, [&] { return taxonomy(cil); }},
  };

  const std::set<int> expected(known_red.begin(), known_red.end());
  int unexpected = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    std::cout << "criterion " << c.id << " " << (pass ? "PASS" : "FAIL") << "  " << c.name
              << ": " << o.detail << " [" << fmt("%.2f", secs) << " s, budget "
              << fmt("%.0f", c.budget_s) << " s" << (in_time ? "" : ", over budget") << "]"
              << (!pass && expected.count(c.id) ? " (known red)" : "") << std::endl;
    if (!pass && !expected.count(c.id)) ++unexpected;
  }
  std::cout << "unexpected failures: " << unexpected << std::endl;
  return unexpected == 0 ? 0 : 1;
}
