// Acceptance gate: one PASS/FAIL line per criterion, exit code = number of
// failures. Each criterion also enforces its wall-clock budget.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ecsim/sweep.hpp"

using namespace ecsim;

namespace {

struct Gate {
  int failures = 0;

  void line(int idx, const std::string& name, bool ok, double seconds,
            double budget, const std::string& detail) {
    const bool in_time = seconds <= budget;
    std::printf("%s  criterion %d: %s (%.2fs, budget %.0fs)%s%s\n",
                ok && in_time ? "PASS" : "FAIL", idx, name.c_str(), seconds,
                budget, detail.empty() ? "" : " -- ", detail.c_str());
    std::fflush(stdout);
    if (!(ok && in_time)) ++failures;
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// 1. At the reference settings the new scheme sits above both original herald
//    classes in fidelity and below both in success probability, everywhere on
//    the default amplitude grid.
void criterion_dominance(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double worst_f = 1.0, worst_p = 1.0;
  for (int i = 0; i < 500; ++i) {
    const double a = 0.1 + (2.5 - 0.1) * i / 499.0;
    const SchemeParams p{a, 0.1, 0.5, 0.5};
    const auto e = original_closed_form(p, ParityOutcome::even_nonzero);
    const auto o = original_closed_form(p, ParityOutcome::odd);
    const auto n = new_closed_form(p);
    worst_f = std::min(worst_f, std::min(n.fidelity - e.fidelity,
                                         e.fidelity - o.fidelity));
    worst_p = std::min(worst_p,
                       std::min(e.probability, o.probability) - n.probability);
    ok = ok && n.fidelity > e.fidelity && e.fidelity > o.fidelity &&
         n.probability < std::min(e.probability, o.probability);
  }
  g.line(1, "fidelity and probability ordering on the default grid", ok,
         seconds_since(t0), 1.0,
         fmt("min fidelity gap %.3e, min probability gap %.3e", worst_f, worst_p));
}

// 2. At matched success probability the fidelity advantage ends inside
//    [1.0, 1.4] on the default comparison grid.
void criterion_crossover(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_parametric(SweepSpec{});
  const bool ok = res.crossover.found && res.crossover.alpha_star > 1.0 &&
                  res.crossover.alpha_star < 1.4;
  g.line(2, "matched-probability advantage crossover in [1.0, 1.4]", ok,
         seconds_since(t0), 5.0,
         res.crossover.found
             ? fmt("alpha* = %.6f at matched probability %.3e",
                   res.crossover.alpha_star, res.crossover.probability_at_crossover)
             : "no crossover found");
}

// 3. Detector loss moves only the new scheme's rate, not its fidelity, while
//    the original scheme's fidelity strictly degrades.
void criterion_detector_loss(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  const double f0 = new_simulate({1.0, 0.1, 0.5, 0.0}).fidelity;
  double worst = 0.0;
  for (double l : {0.25, 0.5, 0.9}) {
    const double f = new_simulate({1.0, 0.1, 0.5, l}).fidelity;
    worst = std::max(worst, std::abs(f - f0));
  }
  ok = ok && worst <= 1e-12;

  double prev = 2.0;
  for (double l : {0.0, 0.3, 0.6, 0.9}) {
    const double f =
        original_simulate({1.0, 0.1, 0.5, l}, ParityOutcome::even_nonzero).fidelity;
    ok = ok && f < prev;
    prev = f;
  }
  g.line(3, "new-scheme fidelity is detector-loss independent", ok,
         seconds_since(t0), 1.0, fmt("max fidelity shift %.3e", worst));
}

// 4. Closed forms track both simulation engines to 1e-9 across the full
//    validation grid.
void criterion_grid(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  const auto grid = validation_grid(ValidationPreset::full);
  for (const SchemeParams& p : grid) {
    const SchemePoint c = closed_point(p, FormulaVariant::adjudicated);
    const SchemePoint e = engine_point(p);
    for (const double d : {c.f_even - e.f_even, c.p_even - e.p_even,
                           c.f_odd - e.f_odd, c.p_odd - e.p_odd,
                           c.f_new - e.f_new, c.p_new - e.p_new})
      worst = std::max(worst, std::abs(d));
  }
  g.line(4, "closed forms vs engines on the validation grid", worst < 1e-9,
         seconds_since(t0), 30.0,
         fmt("max residual %.3e over %.0f points", worst,
             static_cast<double>(grid.size())));
}

// 5. The dyadic engines agree with the independent number-space runs at the
//    designated points within the reported truncation bounds.
void criterion_oracle(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double worst_df = 0.0, worst_dp = 0.0, worst_bound = 0.0;
  for (const auto& [task, p] : designated_oracle_points(ValidationPreset::full)) {
    double ef = 0.0, ep = 0.0;
    switch (task) {
      case OracleTarget::original_even: {
        const auto s = original_simulate(p, ParityOutcome::even_nonzero);
        ef = s.fidelity;
        ep = s.probability;
        break;
      }
      case OracleTarget::original_odd: {
        const auto s = original_simulate(p, ParityOutcome::odd);
        ef = s.fidelity;
        ep = s.probability;
        break;
      }
      default: {
        const auto s = new_simulate(p);
        ef = s.fidelity;
        ep = s.probability;
        break;
      }
    }
    const OracleResult o = oracle_run(p, task, 40);
    const double tol = std::max(1e-6, o.truncation_bound);
    worst_df = std::max(worst_df, std::abs(o.fidelity - ef));
    worst_dp = std::max(worst_dp, std::abs(o.probability - ep));
    worst_bound = std::max(worst_bound, o.truncation_bound);
    ok = ok && std::abs(o.fidelity - ef) < tol &&
         std::abs(o.probability - ep) < tol;
  }
  g.line(5, "engines vs number-space runs at designated points", ok,
         seconds_since(t0), 300.0,
         fmt("max |dF| %.3e, max |dP| %.3e, max bound %.3e", worst_df, worst_dp,
             worst_bound));
}

// 6. The discrimination stage never misidentifies the input sign, and its
//    failure probability follows the vacuum-overlap law.
void criterion_usd(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double worst_mis = 0.0, worst_fail = 0.0;
  for (double alpha : {0.3, 1.0, 2.0}) {
    for (double l : {0.0, 0.5}) {
      const double expected = std::exp(-2.0 * (1.0 - l) * alpha * alpha);
      const auto plus = usd_measure(alpha, l, NormSign::plus);
      const auto minus = usd_measure(alpha, l, NormSign::minus);
      worst_mis = std::max({worst_mis, plus.detector_2, minus.detector_1});
      worst_fail = std::max({worst_fail, std::abs(plus.failure - expected),
                             std::abs(minus.failure - expected)});
      const double total = plus.detector_1 + plus.detector_2 + plus.failure;
      ok = ok && plus.detector_2 <= 1e-12 && minus.detector_1 <= 1e-12 &&
           std::abs(plus.failure - expected) <= 1e-10 &&
           std::abs(minus.failure - expected) <= 1e-10 &&
           std::abs(total - 1.0) <= 1e-10;
    }
  }
  g.line(6, "discrimination misidentification and failure law", ok,
         seconds_since(t0), 1.0,
         fmt("max misidentification %.3e, max failure error %.3e", worst_mis,
             worst_fail));
}

// 7. Limiting cases: perfect fidelity at vanishing amplitude, vanishing herald
//    probability at vanishing tap, no heralds from dead detectors, and perfect
//    fidelity for a lossless channel with a vanishing tap.
void criterion_limits(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string fail;

  {
    const SchemeParams p{1e-4, 0.1, 0.5, 0.5};
    const double fc = original_closed_form(p, ParityOutcome::even_nonzero).fidelity;
    const double fs = original_simulate(p, ParityOutcome::even_nonzero).fidelity;
    if (!(fc > 1.0 - 1e-8 && fs > 1.0 - 1e-8)) {
      ok = false;
      fail += "small-amplitude fidelity; ";
    }
  }
  {
    const SchemeParams p{1.0, 1e-8, 0.5, 0.5};
    const double pc = original_closed_form(p, ParityOutcome::even_nonzero).probability;
    const double ps = original_simulate(p, ParityOutcome::even_nonzero).probability;
    if (!(pc < 1e-8 && ps < 1e-8)) {
      ok = false;
      fail += "small-tap herald probability; ";
    }
  }
  {
    const SchemeParams p{1.0, 0.1, 0.5, 1.0};
    bool threw = false;
    try {
      new_simulate(p);
    } catch (const DegenerateConditioningError&) {
      threw = true;
    }
    if (!(new_closed_form(p).probability == 0.0 && threw)) {
      ok = false;
      fail += "dead-detector herald; ";
    }
  }
  {
    const SchemeParams p{1.0, 1e-8, 0.0, 0.0};
    const double tol = 1.0 - 1e-8;
    const bool near_one =
        original_closed_form(p, ParityOutcome::even_nonzero).fidelity > tol &&
        original_closed_form(p, ParityOutcome::odd).fidelity > tol &&
        new_closed_form(p).fidelity > tol &&
        original_simulate(p, ParityOutcome::even_nonzero).fidelity > tol &&
        original_simulate(p, ParityOutcome::odd).fidelity > tol &&
        new_simulate(p).fidelity > tol;
    if (!near_one) {
      ok = false;
      fail += "lossless vanishing-tap fidelity; ";
    }
  }
  g.line(7, "limiting cases", ok, seconds_since(t0), 5.0,
         ok ? "all four limits within 1e-8" : fail);
}

// 8. Formula adjudication: the engine-confirmed conventions win every contested
//    slot with residuals below 1e-9 while the alternatives are clearly worse.
void criterion_adjudication(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream detail;
  const auto entries = run_adjudication();
  ok = entries.size() == 5;
  for (const auto& e : entries) {
    ok = ok && e.winner == "appendix" && e.winner_residual < 1e-9 &&
         e.loser_residual > e.winner_residual;
    detail << e.formula << " " << (e.winner_residual < 1e-9 ? "ok" : "BAD")
           << " (win " << e.winner_residual << ", lose " << e.loser_residual
           << "); ";
  }
  g.line(8, "contested formula slots adjudicated by the engines", ok,
         seconds_since(t0), 10.0, detail.str());
}

// Randomized sweep over the supported parameter box: outputs stay physical and
// the engines track the closed forms at every draw.
void criterion_randomized(Gate& g) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  bool ok = true;
  double worst = 0.0;
  int bad_draws = 0;
  for (int i = 0; i < 1000; ++i) {
    SchemeParams p{};
    p.alpha = 0.1 + 2.4 * u(rng);
    p.epsilon = 0.3 * (1.0 - u(rng)) + 1e-9;
    p.eta_total = 0.9 * u(rng);
    p.detector_loss = 0.9 * u(rng);

    const SchemePoint c = closed_point(p, FormulaVariant::adjudicated);
    const SchemePoint e = engine_point(p);
    bool draw_ok = true;
    for (const double f : {c.f_even, c.f_odd, c.f_new, e.f_even, e.f_odd, e.f_new})
      draw_ok = draw_ok && f > 0.0 && f <= 1.0 + 1e-12;
    for (const double pr :
         {c.p_even, c.p_odd, c.p_new, e.p_even, e.p_odd, e.p_new})
      draw_ok = draw_ok && pr > 0.0 && pr <= 1.0;
    for (const double d : {c.f_even - e.f_even, c.p_even - e.p_even,
                           c.f_odd - e.f_odd, c.p_odd - e.p_odd,
                           c.f_new - e.f_new, c.p_new - e.p_new}) {
      worst = std::max(worst, std::abs(d));
      draw_ok = draw_ok && std::abs(d) <= 1e-9;
    }
    if (!draw_ok) ++bad_draws;
    ok = ok && draw_ok;
  }
  g.line(9, "randomized invariants over the supported parameter box", ok,
         seconds_since(t0), 60.0,
         fmt("1000 draws, %.0f violations, max closed-vs-engine residual %.3e",
             static_cast<double>(bad_draws), worst));
}

}  // namespace

int main() {
  Gate g;
  criterion_dominance(g);
  criterion_crossover(g);
  criterion_detector_loss(g);
  criterion_grid(g);
  criterion_oracle(g);
  criterion_usd(g);
  criterion_limits(g);
  criterion_adjudication(g);
  criterion_randomized(g);
  std::printf("acceptance: %d/9 criteria passed\n", 9 - g.failures);
  return g.failures;
}
