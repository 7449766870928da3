#pragma once

// Batch evaluation, parametric comparison, and self-validation workflows. The
// command-line tool is a thin wrapper over this header, so every number it
// prints is reproducible through the library API.

#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fock.hpp"
#include "schemes.hpp"

namespace ecsim {

struct SchemeSet {
    bool original_even = true;
    bool original_odd = true;
    bool new_scheme = true;
};

// Accepts a comma-separated subset of: original-even, original-odd, new.
inline SchemeSet parse_schemes(const std::string& csv) {
    SchemeSet s{false, false, false};
    std::stringstream ss(csv);
    std::string item;
    bool any = false;
    while (std::getline(ss, item, ',')) {
        if (item == "original-even") s.original_even = true;
        else if (item == "original-odd") s.original_odd = true;
        else if (item == "new") s.new_scheme = true;
        else throw UsageError("unknown scheme name: '" + item + "'");
        any = true;
    }
    if (!any) throw UsageError("empty scheme list");
    return s;
}

struct SweepSpec {
    double alpha_min = 0.1;
    double alpha_max = 2.5;
    int points = 500;
    double epsilon = 0.1;
    double eta_total = 0.5;
    double detector_loss = 0.5;
    SchemeSet schemes{};
    FormulaVariant variant = FormulaVariant::adjudicated;
    bool with_engine = false;
};

inline void validate_spec(const SweepSpec& s) {
    if (!(s.points >= 2)) throw UsageError("sweep needs at least 2 grid points");
    if (!(std::isfinite(s.alpha_min) && std::isfinite(s.alpha_max) && s.alpha_min > 0.0 &&
          s.alpha_min < s.alpha_max))
        throw UsageError("sweep needs 0 < alpha-min < alpha-max");
    if (!(s.schemes.original_even || s.schemes.original_odd || s.schemes.new_scheme))
        throw UsageError("sweep needs at least one scheme");
    validate_params({s.alpha_min, s.epsilon, s.eta_total, s.detector_loss});
}

inline std::vector<double> sweep_alphas(const SweepSpec& s) {
    std::vector<double> a(static_cast<std::size_t>(s.points));
    for (int i = 0; i < s.points; ++i)
        a[static_cast<std::size_t>(i)] =
            s.alpha_min + (s.alpha_max - s.alpha_min) * i / (s.points - 1);
    return a;
}

// Closed-form and engine values of all six figures of merit at one point.
struct SchemePoint {
    double f_even, p_even, f_odd, p_odd, f_new, p_new;
};

inline SchemePoint closed_point(const SchemeParams& p, FormulaVariant v) {
    const ClosedFormResult e = original_closed_form(p, ParityOutcome::even_nonzero, v);
    const ClosedFormResult o = original_closed_form(p, ParityOutcome::odd, v);
    const ClosedFormResult n = new_closed_form(p, v);
    return {e.fidelity, e.probability, o.fidelity, o.probability, n.fidelity, n.probability};
}

inline SchemePoint engine_point(const SchemeParams& p) {
    const SchemeResult e = original_simulate(p, ParityOutcome::even_nonzero);
    const SchemeResult o = original_simulate(p, ParityOutcome::odd);
    const SchemeResult n = new_simulate(p);
    return {e.fidelity, e.probability, o.fidelity, o.probability, n.fidelity, n.probability};
}

struct SweepTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

inline SweepTable run_sweep(const SweepSpec& spec) {
    validate_spec(spec);
    SweepTable t;
    t.columns.push_back("alpha");
    if (spec.schemes.original_even) { t.columns.push_back("F_even"); t.columns.push_back("P_even"); }
    if (spec.schemes.original_odd) { t.columns.push_back("F_odd"); t.columns.push_back("P_odd"); }
    if (spec.schemes.new_scheme) { t.columns.push_back("F_new"); t.columns.push_back("P_new"); }
    if (spec.with_engine) {
        if (spec.schemes.original_even) { t.columns.push_back("F_even_engine"); t.columns.push_back("P_even_engine"); }
        if (spec.schemes.original_odd) { t.columns.push_back("F_odd_engine"); t.columns.push_back("P_odd_engine"); }
        if (spec.schemes.new_scheme) { t.columns.push_back("F_new_engine"); t.columns.push_back("P_new_engine"); }
    }
    for (const double a : sweep_alphas(spec)) {
        const SchemeParams p{a, spec.epsilon, spec.eta_total, spec.detector_loss};
        const SchemePoint c = closed_point(p, spec.variant);
        std::vector<double> row{a};
        if (spec.schemes.original_even) { row.push_back(c.f_even); row.push_back(c.p_even); }
        if (spec.schemes.original_odd) { row.push_back(c.f_odd); row.push_back(c.p_odd); }
        if (spec.schemes.new_scheme) { row.push_back(c.f_new); row.push_back(c.p_new); }
        if (spec.with_engine) {
            const SchemePoint e = engine_point(p);
            if (spec.schemes.original_even) { row.push_back(e.f_even); row.push_back(e.p_even); }
            if (spec.schemes.original_odd) { row.push_back(e.f_odd); row.push_back(e.p_odd); }
            if (spec.schemes.new_scheme) { row.push_back(e.f_new); row.push_back(e.p_new); }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

// 17 significant digits: enough that parsing the text recovers the double exactly.
inline std::string format_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.16e", v);
    return buf;
}

inline void write_csv(std::ostream& os, const SweepTable& t) {
    for (std::size_t c = 0; c < t.columns.size(); ++c)
        os << (c ? "," : "") << t.columns[c];
    os << "\n";
    for (const std::vector<double>& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            os << (c ? "," : "") << format_value(row[c]);
        os << "\n";
    }
}

// ---------------------------------------------------------------------------
// Parametric comparison: fidelity at matched success probability, and the
// amplitude where the new scheme's fidelity advantage disappears.
// ---------------------------------------------------------------------------

struct CrossoverReport {
    bool found = false;
    bool advantage_everywhere = false; // new scheme ahead over the whole grid
    double alpha_star = 0.0;
    double probability_at_crossover = 0.0;
    double fidelity_new = 0.0;
    double fidelity_original = 0.0;
};

struct ParametricResult {
    SweepTable table; // alpha, then (P, F) per scheme
    CrossoverReport crossover;
};

namespace detail {

// Piecewise-linear F(P) lookup over a monotone probability curve; clamps at the
// curve ends.
inline double interp_f_at_p(const std::vector<double>& ps, const std::vector<double>& fs,
                            double p) {
    if (p <= ps.front()) return fs.front();
    if (p >= ps.back()) return fs.back();
    std::size_t lo = 0, hi = ps.size() - 1;
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        (ps[mid] <= p ? lo : hi) = mid;
    }
    const double w = (p - ps[lo]) / (ps[hi] - ps[lo]);
    return fs[lo] + w * (fs[hi] - fs[lo]);
}

} // namespace detail

inline ParametricResult run_parametric(const SweepSpec& spec) {
    validate_spec(spec);
    ParametricResult out;
    SweepTable& t = out.table;
    t.columns.push_back("alpha");
    if (spec.schemes.original_even) { t.columns.push_back("P_even"); t.columns.push_back("F_even"); }
    if (spec.schemes.original_odd) { t.columns.push_back("P_odd"); t.columns.push_back("F_odd"); }
    if (spec.schemes.new_scheme) { t.columns.push_back("P_new"); t.columns.push_back("F_new"); }
    const std::vector<double> alphas = sweep_alphas(spec);
    for (const double a : alphas) {
        const SchemeParams p{a, spec.epsilon, spec.eta_total, spec.detector_loss};
        const SchemePoint c = closed_point(p, spec.variant);
        std::vector<double> row{a};
        if (spec.schemes.original_even) { row.push_back(c.p_even); row.push_back(c.f_even); }
        if (spec.schemes.original_odd) { row.push_back(c.p_odd); row.push_back(c.f_odd); }
        if (spec.schemes.new_scheme) { row.push_back(c.p_new); row.push_back(c.f_new); }
        t.rows.push_back(std::move(row));
    }

    // Invert the original scheme's F(P) curves on a denser grid reaching below
    // alpha_min, since matching the new scheme's (small) probability requires
    // original-scheme amplitudes below the comparison range.
    const double inv_min = std::min(0.01, spec.alpha_min);
    const int n_inv = 4 * spec.points;
    std::vector<double> pe, fe, po, fo;
    pe.reserve(static_cast<std::size_t>(n_inv));
    for (int i = 0; i < n_inv; ++i) {
        const double a = inv_min + (spec.alpha_max - inv_min) * i / (n_inv - 1);
        const SchemeParams p{a, spec.epsilon, spec.eta_total, spec.detector_loss};
        const ClosedFormResult e = original_closed_form(p, ParityOutcome::even_nonzero, spec.variant);
        const ClosedFormResult o = original_closed_form(p, ParityOutcome::odd, spec.variant);
        pe.push_back(e.probability); fe.push_back(e.fidelity);
        po.push_back(o.probability); fo.push_back(o.fidelity);
    }

    // Advantage g(alpha) = F_new - best original F at the same probability;
    // the crossover is the first grid bracket where g changes sign.
    std::vector<double> gap(alphas.size());
    std::vector<double> fnew(alphas.size()), pnew(alphas.size());
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const SchemeParams p{alphas[i], spec.epsilon, spec.eta_total, spec.detector_loss};
        const ClosedFormResult n = new_closed_form(p, spec.variant);
        fnew[i] = n.fidelity;
        pnew[i] = n.probability;
        const double fbest = std::max(detail::interp_f_at_p(pe, fe, n.probability),
                                      detail::interp_f_at_p(po, fo, n.probability));
        gap[i] = n.fidelity - fbest;
    }
    CrossoverReport& cr = out.crossover;
    for (std::size_t i = 0; i + 1 < alphas.size(); ++i) {
        if (gap[i] > 0.0 && gap[i + 1] <= 0.0) {
            const double w = gap[i] / (gap[i] - gap[i + 1]);
            cr.found = true;
            cr.alpha_star = alphas[i] + w * (alphas[i + 1] - alphas[i]);
            cr.probability_at_crossover = pnew[i] + w * (pnew[i + 1] - pnew[i]);
            cr.fidelity_new = fnew[i] + w * (fnew[i + 1] - fnew[i]);
            cr.fidelity_original = cr.fidelity_new; // equal fidelity at the crossover
            break;
        }
    }
    if (!cr.found) {
        bool all_pos = true;
        for (const double g : gap) all_pos = all_pos && g > 0.0;
        cr.advantage_everywhere = all_pos;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Self-validation: formula adjudication, closed form vs engine on a parameter
// grid, and engine vs number-space oracle at designated points.
// ---------------------------------------------------------------------------

enum class ValidationPreset { smoke, full };

struct AdjudicationEntry {
    std::string formula;
    std::string winner;
    std::string loser;
    double winner_residual;
    double loser_residual;
};

struct OracleCheck {
    std::string task;
    SchemeParams params;
    double engine_fidelity, engine_probability;
    double oracle_fidelity, oracle_probability;
    double fidelity_error, probability_error;
    double truncation_bound;
    double tolerance;
    bool pass;
};

struct ValidationReport {
    std::string preset;
    std::vector<AdjudicationEntry> adjudication;
    bool adjudication_pass = false;
    std::size_t grid_points = 0;
    double grid_max_residual = 0.0;
    double grid_tolerance = 1e-9;
    bool grid_pass = false;
    std::vector<OracleCheck> oracle_checks;
    bool oracle_pass = false;
    bool pass = false;

    std::string to_json() const {
        nlohmann::json j;
        j["preset"] = preset;
        j["adjudication"] = nlohmann::json::array();
        for (const AdjudicationEntry& e : adjudication)
            j["adjudication"].push_back({{"formula", e.formula},
                                         {"winner", e.winner},
                                         {"winner_residual", e.winner_residual},
                                         {"loser", e.loser},
                                         {"loser_residual", e.loser_residual}});
        j["adjudication_pass"] = adjudication_pass;
        j["closed_form_vs_engine"] = {{"grid_points", grid_points},
                                      {"max_residual", grid_max_residual},
                                      {"tolerance", grid_tolerance},
                                      {"pass", grid_pass}};
        j["engine_vs_oracle"] = nlohmann::json::array();
        for (const OracleCheck& c : oracle_checks)
            j["engine_vs_oracle"].push_back({{"task", c.task},
                                             {"alpha", c.params.alpha},
                                             {"epsilon", c.params.epsilon},
                                             {"eta_total", c.params.eta_total},
                                             {"detector_loss", c.params.detector_loss},
                                             {"engine_fidelity", c.engine_fidelity},
                                             {"engine_probability", c.engine_probability},
                                             {"oracle_fidelity", c.oracle_fidelity},
                                             {"oracle_probability", c.oracle_probability},
                                             {"fidelity_error", c.fidelity_error},
                                             {"probability_error", c.probability_error},
                                             {"truncation_bound", c.truncation_bound},
                                             {"tolerance", c.tolerance},
                                             {"pass", c.pass}});
        j["oracle_pass"] = oracle_pass;
        j["pass"] = pass;
        return j.dump(2);
    }
};

inline std::vector<SchemeParams> validation_grid(ValidationPreset preset) {
    const std::vector<double> alphas = preset == ValidationPreset::full
                                           ? std::vector<double>{0.5, 1.0, 1.5, 2.0}
                                           : std::vector<double>{0.5, 1.0};
    const std::vector<double> epsilons =
        preset == ValidationPreset::full ? std::vector<double>{0.05, 0.1, 0.2}
                                         : std::vector<double>{0.1};
    const std::vector<double> etas = preset == ValidationPreset::full
                                         ? std::vector<double>{0.2, 0.5, 0.8}
                                         : std::vector<double>{0.5};
    const std::vector<double> losses = preset == ValidationPreset::full
                                           ? std::vector<double>{0.0, 0.5, 0.9}
                                           : std::vector<double>{0.0, 0.5};
    std::vector<SchemeParams> grid;
    for (double a : alphas)
        for (double e : epsilons)
            for (double h : etas)
                for (double l : losses) grid.push_back({a, e, h, l});
    return grid;
}

inline std::vector<std::pair<OracleTarget, SchemeParams>> designated_oracle_points(
    ValidationPreset preset) {
    if (preset == ValidationPreset::smoke)
        return {{OracleTarget::original_even, {1.0, 0.1, 0.5, 0.5}},
                {OracleTarget::new_scheme, {1.0, 0.1, 0.5, 0.5}}};
    return {{OracleTarget::original_even, {1.0, 0.1, 0.5, 0.5}},
            {OracleTarget::original_odd, {1.0, 0.1, 0.5, 0.5}},
            {OracleTarget::original_even, {2.0, 0.05, 0.2, 0.0}},
            {OracleTarget::original_odd, {0.5, 0.2, 0.8, 0.9}},
            {OracleTarget::new_scheme, {1.0, 0.1, 0.5, 0.5}},
            {OracleTarget::new_scheme, {2.0, 0.05, 0.2, 0.25}},
            {OracleTarget::new_scheme, {0.5, 0.2, 0.8, 0.9}},
            {OracleTarget::new_scheme, {1.5, 0.1, 0.2, 0.0}}};
}

namespace detail {

// Residual of one closed-form candidate against the engines, restricted to the
// figures the candidate affects.
struct CandidateResidual {
    bool orig_f = false, orig_p = false, new_f = false, new_p = false;
};

inline double candidate_residual(const std::vector<SchemeParams>& grid,
                                 const std::vector<SchemePoint>& engine,
                                 EpsConvention ec, EtaPrimeForm ef, OrigProbForm opf,
                                 NewFidForm nff, NewProbForm npf,
                                 const CandidateResidual& which) {
    double worst = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const SchemeParams& p = grid[i];
        const SchemePoint& e = engine[i];
        if (which.orig_f || which.orig_p) {
            const ClosedFormResult ce = original_closed_form_slots(
                p, ParityOutcome::even_nonzero, ec, ef, opf);
            const ClosedFormResult co =
                original_closed_form_slots(p, ParityOutcome::odd, ec, ef, opf);
            if (which.orig_f) {
                worst = std::max(worst, std::abs(ce.fidelity - e.f_even));
                worst = std::max(worst, std::abs(co.fidelity - e.f_odd));
            }
            if (which.orig_p) {
                worst = std::max(worst, std::abs(ce.probability - e.p_even));
                worst = std::max(worst, std::abs(co.probability - e.p_odd));
            }
        }
        if (which.new_f || which.new_p) {
            const ClosedFormResult cn = new_closed_form_slots(p, ec, nff, npf);
            if (which.new_f) worst = std::max(worst, std::abs(cn.fidelity - e.f_new));
            if (which.new_p) worst = std::max(worst, std::abs(cn.probability - e.p_new));
        }
    }
    return worst;
}

} // namespace detail

// Adjudicates each contested formula against the simulation engines on a small
// deterministic grid; the winner must match to 1e-9 and losers are reported.
inline std::vector<AdjudicationEntry> run_adjudication() {
    std::vector<SchemeParams> grid;
    for (double a : {0.5, 1.0, 1.5, 2.0}) {
        grid.push_back({a, 0.1, 0.5, 0.5});
        grid.push_back({a, 0.2, 0.2, 0.25});
    }
    std::vector<SchemePoint> engine;
    engine.reserve(grid.size());
    for (const SchemeParams& p : grid) engine.push_back(engine_point(p));

    using detail::EpsConvention;
    using detail::EtaPrimeForm;
    using detail::NewFidForm;
    using detail::NewProbForm;
    using detail::OrigProbForm;
    std::vector<AdjudicationEntry> out;

    // Everything except the slot under test is held at the winning convention so
    // each entry isolates one question.
    const auto residual = [&](EpsConvention ec, EtaPrimeForm ef, OrigProbForm opf,
                              NewFidForm nff, NewProbForm npf,
                              detail::CandidateResidual which) {
        return detail::candidate_residual(grid, engine, ec, ef, opf, nff, npf, which);
    };

    out.push_back({"epsilon_prime", "appendix", "main-text",
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {true, true, true, true}),
                   residual(EpsConvention::ratio, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {true, true, true, true})});
    out.push_back({"eta_prime", "appendix", "main-text",
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {true, true, false, false}),
                   residual(EpsConvention::reflectivity, EtaPrimeForm::amplitude,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {true, true, false, false})});
    out.push_back({"new_fidelity", "appendix", "main-text",
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {false, false, true, false}),
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::bare_epsilon,
                            NewProbForm::derived, {false, false, true, false})});
    out.push_back({"new_probability", "appendix", "main-text",
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {false, false, false, true}),
                   residual(EpsConvention::ratio, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::squared_gamma, {false, false, false, true})});
    out.push_back({"original_probability_normalization", "appendix", "main-text",
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::squared_normalization, NewFidForm::derived,
                            NewProbForm::derived, {false, true, false, false}),
                   residual(EpsConvention::reflectivity, EtaPrimeForm::composed,
                            OrigProbForm::single_normalization, NewFidForm::derived,
                            NewProbForm::derived, {false, true, false, false})});
    return out;
}

inline ValidationReport run_validation(ValidationPreset preset, int oracle_cutoff = 0) {
    ValidationReport r;
    r.preset = preset == ValidationPreset::full ? "full" : "smoke";

    r.adjudication = run_adjudication();
    r.adjudication_pass = true;
    for (const AdjudicationEntry& e : r.adjudication)
        r.adjudication_pass = r.adjudication_pass && e.winner_residual < 1e-9 &&
                              e.loser_residual > e.winner_residual;

    const std::vector<SchemeParams> grid = validation_grid(preset);
    r.grid_points = grid.size();
    for (const SchemeParams& p : grid) {
        const SchemePoint c = closed_point(p, FormulaVariant::adjudicated);
        const SchemePoint e = engine_point(p);
        for (const double d :
             {c.f_even - e.f_even, c.p_even - e.p_even, c.f_odd - e.f_odd,
              c.p_odd - e.p_odd, c.f_new - e.f_new, c.p_new - e.p_new})
            r.grid_max_residual = std::max(r.grid_max_residual, std::abs(d));
    }
    r.grid_pass = r.grid_max_residual < r.grid_tolerance;

    const int cutoff =
        oracle_cutoff > 0 ? oracle_cutoff : (preset == ValidationPreset::full ? 40 : 25);
    r.oracle_pass = true;
    for (const auto& [task, p] : designated_oracle_points(preset)) {
        OracleCheck c{};
        c.params = p;
        switch (task) {
            case OracleTarget::original_even: {
                c.task = "original_even";
                const SchemeResult s = original_simulate(p, ParityOutcome::even_nonzero);
                c.engine_fidelity = s.fidelity; c.engine_probability = s.probability;
                break;
            }
            case OracleTarget::original_odd: {
                c.task = "original_odd";
                const SchemeResult s = original_simulate(p, ParityOutcome::odd);
                c.engine_fidelity = s.fidelity; c.engine_probability = s.probability;
                break;
            }
            default: {
                c.task = "new";
                const SchemeResult s = new_simulate(p);
                c.engine_fidelity = s.fidelity; c.engine_probability = s.probability;
                break;
            }
        }
        const OracleResult o = oracle_run(p, task, cutoff);
        c.oracle_fidelity = o.fidelity;
        c.oracle_probability = o.probability;
        c.truncation_bound = o.truncation_bound;
        c.fidelity_error = std::abs(c.engine_fidelity - c.oracle_fidelity);
        c.probability_error = std::abs(c.engine_probability - c.oracle_probability);
        c.tolerance = std::max(1e-6, c.truncation_bound);
        c.pass = c.fidelity_error <= c.tolerance && c.probability_error <= c.tolerance;
        r.oracle_pass = r.oracle_pass && c.pass;
        r.oracle_checks.push_back(std::move(c));
    }

    r.pass = r.adjudication_pass && r.grid_pass && r.oracle_pass;
    return r;
}

} // namespace ecsim
