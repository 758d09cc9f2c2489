#include "cpitk/outlierscan.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "cpitk/arma.hpp"
#include "cpitk/error.hpp"
#include "cpitk/io.hpp"
#include "cpitk/parallel.hpp"

namespace cpitk::outlierscan {

using calendar::RegressorKind;
using sarimax::FittedModel;

std::string type_name(OutlierType t) {
    switch (t) {
        case OutlierType::AO: return "AO";
        case OutlierType::IO: return "IO";
        case OutlierType::LS: return "LS";
        case OutlierType::TC: return "TC";
    }
    return "?";
}

OutlierType type_from_name(const std::string& name) {
    if (name == "AO") return OutlierType::AO;
    if (name == "IO") return OutlierType::IO;
    if (name == "LS") return OutlierType::LS;
    if (name == "TC") return OutlierType::TC;
    throw DataError("unknown outlier type '" + name + "'");
}

namespace {

constexpr std::array<OutlierType, 4> kTypes{OutlierType::AO, OutlierType::IO, OutlierType::LS, OutlierType::TC};

std::vector<double> differenced(const std::vector<double>& x, const std::vector<double>& c) {
    const std::size_t order = c.size() - 1;
    std::vector<double> out(x.size() - order);
    for (std::size_t t = order; t < x.size(); ++t) {
        double v = x[t];
        for (std::size_t i = 1; i <= order; ++i) v -= c[i] * x[t - i];
        out[t - order] = v;
    }
    return out;
}

// Applies ar(B)/ma(B) with zero pre-sample values.
std::vector<double> pi_filter(const arma::ArmaPolynomials& poly, const std::vector<double>& x) {
    std::vector<double> e(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
        double v = x[t];
        for (std::size_t i = 1; i <= poly.ar.size() && i <= t; ++i) v -= poly.ar[i - 1] * x[t - i];
        for (std::size_t j = 1; j <= poly.ma.size() && j <= t; ++j) v -= poly.ma[j - 1] * e[t - j];
        e[t] = v;
    }
    return e;
}

struct Context {
    arma::ArmaPolynomials poly;
    std::vector<double> diff;
    int order = 0;
    int T = 0;
    int n = 0;
    YearMonth start;
};

Context make_context(const FittedModel& model) {
    Context c;
    const auto& a = model.arma;
    c.poly = arma::expand(a.ar, a.sar, a.ma, a.sma, model.spec.season);
    if (!(arma::min_root_modulus_ma(c.poly.ma) > 1.0)) {
        throw NumericalError("outlier filter explodes: MA polynomial is not invertible");
    }
    c.diff = timeseries::differencing_polynomial(model.spec.d, model.spec.D, model.spec.season);
    c.order = static_cast<int>(c.diff.size()) - 1;
    c.T = static_cast<int>(model.series.size());
    c.n = c.T - c.order;
    c.start = model.series.start();
    return c;
}

std::vector<double> shape(OutlierType type, int anchor, int T, double delta) {
    std::vector<double> s(static_cast<std::size_t>(T), 0.0);
    for (int t = std::max(anchor, 0); t < T; ++t) {
        const auto i = static_cast<std::size_t>(t);
        switch (type) {
            case OutlierType::AO:
            case OutlierType::IO: s[i] = t == anchor ? 1.0 : 0.0; break;
            case OutlierType::LS: s[i] = 1.0; break;
            case OutlierType::TC: s[i] = std::pow(delta, t - anchor); break;
        }
    }
    return s;
}

std::vector<double> regressor(const Context& c, OutlierType type, int anchor, double delta) {
    if (type == OutlierType::IO) {
        std::vector<double> x(static_cast<std::size_t>(c.n), 0.0);
        const int pos = anchor - c.order;
        if (pos >= 0 && pos < c.n) x[static_cast<std::size_t>(pos)] = 1.0;
        return x;
    }
    return pi_filter(c.poly, differenced(shape(type, anchor, c.T, delta), c.diff));
}

std::vector<double> residuals(const MonthlySeries& series, const FittedModel& model, const Context& c) {
    if (series.start() != model.series.start() || series.size() != model.series.size()) {
        throw DataError("detect: series does not cover the model's sample");
    }
    if (series.has_missing()) throw DataError("detect: series has missing values");
    const auto& spec = model.spec;
    if (model.beta.size() != spec.mean_regressors.size() || model.io.size() != spec.innovation_pulses.size()) {
        throw DataError("detect: model residuals unavailable (coefficients missing)");
    }
    std::vector<double> adj(series.values().begin(), series.values().end());
    for (std::size_t j = 0; j < spec.mean_regressors.size(); ++j) {
        for (int t = 0; t < c.T; ++t) {
            adj[static_cast<std::size_t>(t)] -= model.beta[j] * spec.mean_regressors[j].at(series.month_at(static_cast<std::size_t>(t)));
        }
    }
    auto e = pi_filter(c.poly, differenced(adj, c.diff));
    for (std::size_t j = 0; j < spec.innovation_pulses.size(); ++j) {
        const int pos = (spec.innovation_pulses[j].anchor - c.start) - c.order;
        if (pos >= 0 && pos < c.n) e[static_cast<std::size_t>(pos)] -= model.io[j];
    }
    for (double v : e) {
        if (!std::isfinite(v)) throw NumericalError("outlier filter produced non-finite residuals");
    }
    return e;
}

double mad_scale(std::vector<double> r) {
    const auto mid = r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2);
    std::nth_element(r.begin(), mid, r.end());
    const double med = *mid;
    for (auto& v : r) v = std::abs(v - med);
    std::nth_element(r.begin(), mid, r.end());
    return 1.482602218505602 * *mid;
}

struct Candidate {
    int anchor = 0;
    OutlierType type = OutlierType::AO;
    double omega = 0.0;
    double t = 0.0;
    std::vector<double> x;
};

}  // namespace

std::vector<double> filtered_regressor(const FittedModel& model, OutlierType type, YearMonth month, double tc_delta) {
    const auto c = make_context(model);
    return regressor(c, type, month - c.start, tc_delta);
}

std::vector<double> filtered_residuals(const MonthlySeries& series, const FittedModel& model) {
    const auto c = make_context(model);
    return residuals(series, model, c);
}

std::vector<OutlierFinding> detect(const MonthlySeries& series, const FittedModel& model, const DetectOptions& options) {
    if (!(options.critical > 0.0)) throw DataError("detect: critical value must be positive");
    if (!(options.tc_delta > 0.0 && options.tc_delta < 1.0)) throw DataError("detect: TC delta must lie in (0,1)");
    const auto c = make_context(model);
    auto e = residuals(series, model, c);
    const std::size_t n = e.size();

    // Regressors depend only on (type, anchor): build them once.
    std::vector<std::array<std::vector<double>, 4>> xs(static_cast<std::size_t>(c.T));
    std::vector<std::array<double, 4>> xx(static_cast<std::size_t>(c.T));
    for (int k = 0; k < c.T; ++k) {
        for (std::size_t ti = 0; ti < kTypes.size(); ++ti) {
            auto x = regressor(c, kTypes[ti], k, options.tc_delta);
            double ss = 0.0;
            for (double v : x) ss += v * v;
            xx[static_cast<std::size_t>(k)][ti] = ss;
            xs[static_cast<std::size_t>(k)][ti] = std::move(x);
        }
    }

    std::vector<bool> taken(static_cast<std::size_t>(c.T), false);
    std::vector<OutlierFinding> out;
    std::vector<double> r(n);
    while (static_cast<int>(out.size()) < options.max_findings) {
        Candidate best;
        bool have = false;
        for (int k = 0; k < c.T; ++k) {
            if (taken[static_cast<std::size_t>(k)]) continue;
            for (std::size_t ti = 0; ti < kTypes.size(); ++ti) {
                const double ss = xx[static_cast<std::size_t>(k)][ti];
                if (!(ss > 1e-12)) continue;
                const auto& x = xs[static_cast<std::size_t>(k)][ti];
                double xe = 0.0;
                for (std::size_t t = 0; t < n; ++t) xe += x[t] * e[t];
                const double omega = xe / ss;
                for (std::size_t t = 0; t < n; ++t) r[t] = e[t] - omega * x[t];
                const double scale = mad_scale(r);
                if (!(scale > 0.0)) continue;
                const double tstat = omega * std::sqrt(ss) / scale;
                if (!have || std::abs(tstat) > std::abs(best.t)) {
                    best = {k, kTypes[ti], omega, tstat, {}};
                    have = true;
                }
            }
        }
        if (!have || std::abs(best.t) < options.critical) break;
        const auto& x = xs[static_cast<std::size_t>(best.anchor)][static_cast<std::size_t>(best.type)];
        for (std::size_t t = 0; t < n; ++t) e[t] -= best.omega * x[t];
        taken[static_cast<std::size_t>(best.anchor)] = true;
        out.push_back({c.start + best.anchor, best.type, best.omega, best.t});
    }
    std::stable_sort(out.begin(), out.end(), [](const OutlierFinding& a, const OutlierFinding& b) {
        if (std::abs(a.t_stat) != std::abs(b.t_stat)) return std::abs(a.t_stat) > std::abs(b.t_stat);
        return a.month < b.month;
    });
    return out;
}

calendar::RegressorColumn finding_column(const OutlierFinding& f, MonthRange range, double tc_delta) {
    RegressorKind kind = RegressorKind::AOPulse;
    switch (f.type) {
        case OutlierType::AO: kind = RegressorKind::AOPulse; break;
        case OutlierType::IO: kind = RegressorKind::IOPulse; break;
        case OutlierType::LS: kind = RegressorKind::LSStep; break;
        case OutlierType::TC: kind = RegressorKind::TCDecay; break;
    }
    return calendar::intervention_column(range, kind, f.month, tc_delta);
}

IterativeResult detect_iterative(const MonthlySeries& series, const sarimax::SarimaSpec& spec,
                                 const DetectOptions& options, int max_rounds, const sarimax::FitOptions& fit_options) {
    IterativeResult res;
    auto current = spec;
    res.model = sarimax::fit(series, current, fit_options);
    std::vector<YearMonth> covered;
    for (const auto& r : current.mean_regressors) {
        if (!r.is_sf()) covered.push_back(r.anchor);
    }
    for (const auto& r : current.innovation_pulses) covered.push_back(r.anchor);

    for (int round = 0; round < max_rounds; ++round) {
        const auto found = detect(series, res.model, options);
        std::vector<OutlierFinding> fresh;
        for (const auto& f : found) {
            if (std::find(covered.begin(), covered.end(), f.month) == covered.end()) fresh.push_back(f);
        }
        if (fresh.empty()) return res;
        res.rounds = round + 1;
        for (const auto& f : fresh) {
            auto col = finding_column(f, series.range(), options.tc_delta);
            if (f.type == OutlierType::IO) {
                current.innovation_pulses.push_back(std::move(col));
            } else {
                current.mean_regressors.push_back(std::move(col));
            }
            covered.push_back(f.month);
            res.findings.push_back(f);
        }
        auto opts = fit_options;
        opts.start = res.model.arma;
        res.model = sarimax::fit(series, current, opts);
    }
    // Still finding new months after the last refit?
    const auto found = detect(series, res.model, options);
    for (const auto& f : found) {
        if (std::find(covered.begin(), covered.end(), f.month) == covered.end()) res.round_limit_reached = true;
    }
    return res;
}

OutlierCensus census(const MonthlySeries& series, const std::vector<FittedModel>& models, const DetectOptions& options,
                     int threads) {
    if (models.empty()) throw DataError("census: empty model set");
    OutlierCensus c;
    c.start = series.start();
    c.models = static_cast<int>(models.size());
    c.counts.assign(series.size(), 0);
    c.per_model.resize(models.size());
    parallel_for(models.size(), threads, [&](std::size_t i) { c.per_model[i] = detect(series, models[i], options); });
    for (const auto& findings : c.per_model) {
        std::vector<bool> hit(series.size(), false);
        for (const auto& f : findings) hit[static_cast<std::size_t>(f.month - c.start)] = true;
        for (std::size_t t = 0; t < hit.size(); ++t) c.counts[t] += hit[t] ? 1 : 0;
    }
    int jan = 0;
    int feb = 0;
    for (std::size_t t = 0; t < c.counts.size(); ++t) {
        c.total += c.counts[t];
        const int m = series.month_at(t).month;
        if (m == 1) jan += c.counts[t];
        if (m == 2) feb += c.counts[t];
    }
    if (c.total > 0) {
        c.share_january = static_cast<double>(jan) / c.total;
        c.share_february = static_cast<double>(feb) / c.total;
        c.share_other = 1.0 - c.share_january - c.share_february;
    }
    return c;
}

void write_findings_csv(std::ostream& out, const std::vector<OutlierFinding>& findings) {
    out << "date,type,omega,t_stat\n";
    for (const auto& f : findings) {
        out << f.month.to_string() << ',' << type_name(f.type) << ',' << io::format_double(f.omega) << ','
            << io::format_double(f.t_stat) << '\n';
    }
}

void write_census_csv(std::ostream& out, const OutlierCensus& c) {
    out << "date,count\n";
    for (std::size_t t = 0; t < c.counts.size(); ++t) {
        out << (c.start + static_cast<int>(t)).to_string() << ',' << c.counts[t] << '\n';
    }
}

}  // namespace cpitk::outlierscan
