#include "cpitk/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "cpitk/error.hpp"
#include "cpitk/io.hpp"
#include "cpitk/parallel.hpp"

namespace cpitk::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw DataError("config: '" + where + "' must be an object");
    for (const auto& [k, v] : j.items()) {
        if (!allowed.contains(k)) throw DataError("config: unknown key '" + where + "." + k + "'");
    }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw DataError("config: bad value for '" + where + "." + key + "'");
    }
}

YearMonth get_month(const json& j, const std::string& key, const std::string& where, YearMonth fallback) {
    if (!j.contains(key)) return fallback;
    return YearMonth::parse(get<std::string>(j, key, where, ""));
}

calendar::HolidayWindow window_from(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 3) throw DataError("config: '" + where + "' must be [before, during, after]");
    calendar::HolidayWindow w{v[0].get<int>(), v[1].get<int>(), v[2].get<int>()};
    if (w.before < 0 || w.during < 0 || w.after < 0) throw DataError("config: negative window length in " + where);
    return w;
}

selection::OrderSpec orders_from(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 4) throw DataError("config: '" + where + "' must be [p, q, P, Q]");
    selection::OrderSpec o{v[0].get<int>(), v[1].get<int>(), v[2].get<int>(), v[3].get<int>()};
    if (o.p < 0 || o.q < 0 || o.P < 0 || o.Q < 0) throw DataError("config: negative order in " + where);
    return o;
}

void require_file(const PipelineConfig& c, const std::string& p, const std::string& what) {
    if (p.empty()) return;
    const fs::path full = fs::path(p).is_absolute() ? fs::path(p) : c.base_dir / p;
    if (!fs::is_regular_file(full)) throw DataError("config: " + what + " file '" + full.string() + "' not found");
}

fs::path resolve(const PipelineConfig& c, const std::string& p) {
    return fs::path(p).is_absolute() ? fs::path(p) : c.base_dir / p;
}

}  // namespace

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("config: invalid JSON: ") + e.what());
    }
    PipelineConfig c;
    c.base_dir = base_dir;
    try {
        check_keys(j, "config",
                   {"data", "sample", "model", "grid", "outliers", "backtest", "seasadj", "di", "seed", "threads",
                    "output_dir"});

        const json data = j.value("data", json::object());
        check_keys(data, "data", {"target", "adjusted", "covariates", "lunar_override"});
        c.target_path = get<std::string>(data, "target", "data", "");
        c.adjusted_path = get<std::string>(data, "adjusted", "data", "");
        c.covariates_path = get<std::string>(data, "covariates", "data", "");
        c.lunar_override_path = get<std::string>(data, "lunar_override", "data", "");
        if (c.target_path.empty()) throw DataError("config: data.target is required");

        if (j.contains("sample")) {
            const json& s = j["sample"];
            check_keys(s, "sample", {"start", "end"});
            if (!s.contains("start") || !s.contains("end")) throw DataError("config: sample needs start and end");
            c.sample = MonthRange{get_month(s, "start", "sample", {}), get_month(s, "end", "sample", {})};
            if (c.sample->last < c.sample->first) throw DataError("config: sample end precedes start");
        }

        const json model = j.value("model", json::object());
        check_keys(model, "model", {"orders", "tau", "interventions"});
        if (model.contains("orders")) c.orders = orders_from(model["orders"], "model.orders");
        if (model.contains("tau")) c.tau = window_from(model["tau"], "model.tau");
        for (const auto& iv : model.value("interventions", json::array())) {
            check_keys(iv, "model.interventions[]", {"type", "month"});
            c.interventions.push_back({outlierscan::type_from_name(get<std::string>(iv, "type", "intervention", "AO")),
                                       get_month(iv, "month", "intervention", {})});
        }

        const json grid = j.value("grid", json::object());
        check_keys(grid, "grid", {"max_order", "orders", "taus", "top_n", "thresholds"});
        c.grid_max_order = get<int>(grid, "max_order", "grid", 2);
        if (c.grid_max_order < 0 || c.grid_max_order > 4) throw DataError("config: grid.max_order must be in 0..4");
        for (const auto& o : grid.value("orders", json::array())) c.grid_orders.push_back(orders_from(o, "grid.orders[]"));
        for (const auto& t : grid.value("taus", json::array())) c.grid_taus.push_back(window_from(t, "grid.taus[]"));
        if (grid.contains("orders") && c.grid_orders.empty()) throw DataError("config: grid.orders is empty");
        if (grid.contains("taus") && c.grid_taus.empty()) throw DataError("config: grid.taus is empty");
        c.summary.top_n = get<std::size_t>(grid, "top_n", "grid", 20);
        const json th = grid.value("thresholds", json::object());
        check_keys(th, "grid.thresholds", {"c_fit", "bic", "c_fc"});
        c.summary.max_c_fit = get<double>(th, "c_fit", "grid.thresholds", 0.55);
        c.summary.max_bic = get<double>(th, "bic", "grid.thresholds", 220.0);
        c.summary.max_c_fc = get<double>(th, "c_fc", "grid.thresholds", 0.55);

        const json out = j.value("outliers", json::object());
        check_keys(out, "outliers", {"critical", "tc_delta", "max_findings", "census"});
        c.detect.critical = get<double>(out, "critical", "outliers", 3.5);
        c.detect.tc_delta = get<double>(out, "tc_delta", "outliers", 0.8);
        c.detect.max_findings = get<int>(out, "max_findings", "outliers", 20);
        c.census = get<bool>(out, "census", "outliers", true);
        if (!(c.detect.critical > 0.0)) throw DataError("config: outliers.critical must be positive");
        if (!(c.detect.tc_delta > 0.0 && c.detect.tc_delta < 1.0)) throw DataError("config: outliers.tc_delta must be in (0,1)");

        const json bt = j.value("backtest", json::object());
        check_keys(bt, "backtest", {"scheme", "training_start", "span", "horizons", "refit_stride", "engines"});
        c.protocol.scheme = backtest::scheme_from_name(get<std::string>(bt, "scheme", "backtest", "expanding"));
        c.protocol.training_start = get_month(bt, "training_start", "backtest", {2002, 1});
        if (bt.contains("span")) {
            const auto sp = get<std::vector<std::string>>(bt, "span", "backtest", {});
            if (sp.size() != 2) throw DataError("config: backtest.span must be [first, last]");
            c.protocol.forecast_span = {YearMonth::parse(sp[0]), YearMonth::parse(sp[1])};
        }
        c.protocol.horizons = get<std::vector<int>>(bt, "horizons", "backtest", {1, 2, 3, 6, 9, 12});
        c.protocol.refit_stride = get<int>(bt, "refit_stride", "backtest", 1);
        c.engines = get<std::vector<std::string>>(bt, "engines", "backtest", {"sarimax", "di"});
        for (const auto& e : c.engines) {
            if (e != "sarimax" && e != "di") throw DataError("config: unknown backtest engine '" + e + "'");
        }
        c.protocol.validate();

        const json sa = j.value("seasadj", json::object());
        check_keys(sa, "seasadj", {"mode", "use_official_adjusted"});
        c.mode = seasadj::mode_from_name(get<std::string>(sa, "mode", "seasadj", "additive"));
        c.use_official_adjusted = get<bool>(sa, "use_official_adjusted", "seasadj", true);

        const json di = j.value("di", json::object());
        check_keys(di, "di", {"max_k", "max_p", "max_m", "min_dof", "transform", "transforms"});
        c.di_grid.max_k = get<int>(di, "max_k", "di", 1);
        c.di_grid.max_p = get<int>(di, "max_p", "di", 6);
        c.di_grid.max_m = get<int>(di, "max_m", "di", 6);
        c.di_grid.min_dof = get<int>(di, "min_dof", "di", 10);
        if (c.di_grid.max_k < 1 || c.di_grid.max_k > 5) throw DataError("config: di.max_k must be in 1..5");
        if (c.di_grid.max_p < 1 || c.di_grid.max_m < 1) throw DataError("config: di lag bounds must be >= 1");
        c.default_transform = get<int>(di, "transform", "di", 1);
        (void)timeseries::transform_from_int(c.default_transform);
        if (di.contains("transforms")) {
            const json& t = di["transforms"];
            if (t.is_array()) {
                c.transform_list = t.get<std::vector<int>>();
            } else if (t.is_object()) {
                c.transform_by_name = t.get<std::map<std::string, int>>();
            } else {
                throw DataError("config: di.transforms must be a list or an object");
            }
            for (int v : c.transform_list) (void)timeseries::transform_from_int(v);
            for (const auto& [k, v] : c.transform_by_name) (void)timeseries::transform_from_int(v);
        }

        c.seed = get<std::uint64_t>(j, "seed", "config", 20020101);
        c.threads = get<int>(j, "threads", "config", 1);
        if (c.threads < 1) throw DataError("config: threads must be >= 1");
        c.output_dir = get<std::string>(j, "output_dir", "config", "out");
    } catch (const json::exception& e) {
        throw DataError(std::string("config: ") + e.what());
    }

    require_file(c, c.target_path, "target");
    require_file(c, c.adjusted_path, "adjusted");
    require_file(c, c.covariates_path, "covariates");
    require_file(c, c.lunar_override_path, "lunar override");
    return c;
}

PipelineConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::string canonical_json(const PipelineConfig& c) {
    auto ord = [](const selection::OrderSpec& o) { return json::array({o.p, o.q, o.P, o.Q}); };
    auto win = [](const calendar::HolidayWindow& w) { return json::array({w.before, w.during, w.after}); };
    json j;
    j["data"] = {{"target", c.target_path},
                 {"adjusted", c.adjusted_path},
                 {"covariates", c.covariates_path},
                 {"lunar_override", c.lunar_override_path}};
    if (c.sample) j["sample"] = {{"start", c.sample->first.to_string()}, {"end", c.sample->last.to_string()}};
    json ivs = json::array();
    for (const auto& iv : c.interventions) {
        ivs.push_back({{"type", outlierscan::type_name(iv.type)}, {"month", iv.month.to_string()}});
    }
    j["model"] = {{"orders", ord(c.orders)}, {"tau", win(c.tau)}, {"interventions", ivs}};
    json go = json::array(), gt = json::array();
    for (const auto& o : c.grid_orders) go.push_back(ord(o));
    for (const auto& t : c.grid_taus) gt.push_back(win(t));
    j["grid"] = {{"max_order", c.grid_max_order},
                 {"orders", go},
                 {"taus", gt},
                 {"top_n", c.summary.top_n},
                 {"thresholds", {{"c_fit", c.summary.max_c_fit}, {"bic", c.summary.max_bic}, {"c_fc", c.summary.max_c_fc}}}};
    j["outliers"] = {{"critical", c.detect.critical},
                     {"tc_delta", c.detect.tc_delta},
                     {"max_findings", c.detect.max_findings},
                     {"census", c.census}};
    j["backtest"] = {{"scheme", backtest::scheme_name(c.protocol.scheme)},
                     {"training_start", c.protocol.training_start.to_string()},
                     {"span", {c.protocol.forecast_span.first.to_string(), c.protocol.forecast_span.last.to_string()}},
                     {"horizons", c.protocol.horizons},
                     {"refit_stride", c.protocol.refit_stride},
                     {"engines", c.engines}};
    j["seasadj"] = {{"mode", seasadj::mode_name(c.mode)}, {"use_official_adjusted", c.use_official_adjusted}};
    j["di"] = {{"max_k", c.di_grid.max_k},
               {"max_p", c.di_grid.max_p},
               {"max_m", c.di_grid.max_m},
               {"min_dof", c.di_grid.min_dof},
               {"transform", c.default_transform},
               {"transforms", c.transform_by_name.empty() ? json(c.transform_list) : json(c.transform_by_name)}};
    j["seed"] = c.seed;
    j["fast"] = c.fast;
    return j.dump();
}

std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string config_hash(const PipelineConfig& c) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json(c))));
    return buf;
}

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"fit",      "grid",    "outliers",    "sf-effects",
                                                "backtest", "seasadj", "di-forecast", "report"};
    return names;
}

sarimax::SarimaSpec model_spec(const PipelineConfig& c, MonthRange range, const calendar::LunarTable& table) {
    sarimax::SarimaSpec s;
    s.p = c.orders.p;
    s.q = c.orders.q;
    s.P = c.orders.P;
    s.Q = c.orders.Q;
    s.mean_regressors = calendar::sf_active_columns(range, table, c.tau);
    for (const auto& iv : c.interventions) {
        auto col = outlierscan::finding_column({iv.month, iv.type, 0.0, 0.0}, range, c.detect.tc_delta);
        if (iv.type == outlierscan::OutlierType::IO) {
            s.innovation_pulses.push_back(std::move(col));
        } else {
            s.mean_regressors.push_back(std::move(col));
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

struct Context {
    const PipelineConfig& config;
    std::ostream& log;
    fs::path out;
    calendar::LunarTable table;
    MonthlySeries target;
    std::string hash;

    sarimax::FitOptions fit_options() const {
        sarimax::FitOptions fo;
        fo.seed = config.seed;
        return fo;
    }

    backtest::BacktestProtocol protocol() const {
        auto p = config.protocol;
        if (config.fast) p.refit_stride = 6;
        return p;
    }

    std::string header(const std::string& command, const std::vector<std::string>& notes = {}) const {
        std::ostringstream os;
        os << "# tool: cpitk " << kVersion << '\n'
           << "# command: " << command << '\n'
           << "# config_hash: " << hash << '\n'
           << "# seed: " << config.seed << '\n';
        for (const auto& n : notes) os << "# note: " << n << '\n';
        return os.str();
    }

    json metadata(const std::string& command, const std::vector<std::string>& notes = {}) const {
        return {{"tool", "cpitk"}, {"version", kVersion}, {"command", command}, {"config_hash", hash},
                {"seed", config.seed}, {"notes", notes}};
    }

    void write(const std::string& name, const std::string& content) const {
        const auto path = out / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw DataError("cannot write '" + path.string() + "'");
        f << content;
        log << "wrote " << path.string() << '\n';
    }

    std::optional<Panel> covariates() const {
        if (config.covariates_path.empty()) return std::nullopt;
        auto p = io::read_panel_csv(resolve(config, config.covariates_path).string());
        if (config.sample) {
            const YearMonth a = std::max(p.start, config.sample->first);
            const YearMonth b = std::min(p.end(), config.sample->last);
            p = p.slice(a, b);
        }
        return p;
    }

    std::optional<MonthlySeries> adjusted() const {
        if (config.adjusted_path.empty()) return std::nullopt;
        auto s = io::read_series_csv(resolve(config, config.adjusted_path).string());
        if (config.sample) s = s.slice(std::max(s.start(), config.sample->first), std::min(s.end(), config.sample->last));
        return s;
    }
};

const std::string kX13Note = "seasonal factors from classical 2x12 moving-average decomposition, substituted for X-13ARIMA-SEATS";

std::string json_with_metadata(const std::string& body, const json& meta) {
    auto j = json::parse(body);
    j["metadata"] = meta;
    return j.dump(2) + "\n";
}

void cmd_fit(const Context& cx) {
    const auto spec = model_spec(cx.config, cx.target.range(), cx.table);
    const auto m = sarimax::fit(cx.target, spec, cx.fit_options());
    cx.log << "fit " << spec.orders_string() << " tau=" << cx.config.tau.to_string() << " loglik=" << m.loglik
           << " sigma=" << m.sigma << '\n';
    cx.write("model.json", json_with_metadata(sarimax::to_json(m), cx.metadata("fit")));
}

void cmd_grid(const Context& cx) {
    const auto& c = cx.config;
    const auto orders = c.grid_orders.empty() ? selection::order_grid(c.grid_max_order) : c.grid_orders;
    const auto taus = c.grid_taus.empty() ? calendar::window_grid() : c.grid_taus;
    selection::GridOptions opt;
    opt.base = model_spec(c, cx.target.range(), cx.table);
    opt.table = cx.table;
    opt.protocol = cx.protocol();
    opt.fit = cx.fit_options();
    opt.threads = c.threads;
    opt.keep_models = false;
    const std::size_t total = orders.size() * taus.size();
    const std::size_t step = std::max<std::size_t>(1, total / 20);
    opt.progress = [&](std::size_t done, std::size_t n) {
        if (done % step == 0 || done == n) cx.log << "grid: " << done << "/" << n << " cells\n" << std::flush;
    };
    const double sigma0 = selection::baseline_sigma(cx.target);
    cx.log << "grid: " << orders.size() << " orders x " << taus.size() << " windows, sigma0=" << sigma0 << '\n';
    const auto g = selection::grid_search(cx.target, orders, taus, sigma0, opt);

    const std::vector<std::string> notes{
        "c_fc RMSE divides by the number of forecasts made",
        "rank ties are broken by the lexicographically smaller (p,q,P,Q,tau)",
        "c_fc refit stride " + std::to_string(opt.protocol.refit_stride)};
    std::ostringstream cells, ords;
    write_cells_csv(cells, g);
    write_orders_csv(ords, g);
    cx.write("grid_cells.csv", cx.header("grid", notes) + cells.str());
    cx.write("grid_orders.csv", cx.header("grid", notes) + ords.str());
    cx.write("grid_summary.json", json_with_metadata(selection::summary_json(g, c.summary), cx.metadata("grid", notes)));
    if (!g.orders.empty()) {
        const auto& b = g.orders.front();
        cx.log << "best " << b.order.to_string() << " tau=" << b.tau_star.to_string() << " rank_sum=" << b.score.rank_sum
               << '\n';
    }
}

void cmd_outliers(const Context& cx) {
    const auto& c = cx.config;
    const auto spec = model_spec(c, cx.target.range(), cx.table);
    const auto m = sarimax::fit(cx.target, spec, cx.fit_options());
    const auto findings = outlierscan::detect(cx.target, m, c.detect);
    cx.log << "outliers: " << findings.size() << " findings at C=" << c.detect.critical << '\n';
    std::ostringstream os;
    outlierscan::write_findings_csv(os, findings);
    cx.write("outliers.csv", cx.header("outliers") + os.str());
    if (!c.census) return;

    const auto orders = c.grid_orders.empty() ? selection::order_grid(c.grid_max_order) : c.grid_orders;
    std::vector<sarimax::FittedModel> models(orders.size());
    std::vector<std::string> failures(orders.size());
    auto fo = cx.fit_options();
    fo.compute_std_errors = false;
    parallel_for(orders.size(), c.threads, [&](std::size_t i) {
        auto s = spec;
        s.p = orders[i].p;
        s.q = orders[i].q;
        s.P = orders[i].P;
        s.Q = orders[i].Q;
        try {
            models[i] = sarimax::fit(cx.target, s, fo);
        } catch (const NumericalError& e) {
            failures[i] = e.what();
        }
    });
    std::vector<sarimax::FittedModel> ok;
    std::vector<std::string> notes;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        if (failures[i].empty()) {
            ok.push_back(std::move(models[i]));
        } else {
            notes.push_back("order " + orders[i].to_string() + " failed: " + failures[i]);
        }
    }
    const auto cs = outlierscan::census(cx.target, ok, c.detect, c.threads);
    std::ostringstream cv;
    outlierscan::write_census_csv(cv, cs);
    cx.write("census.csv", cx.header("outliers", notes) + cv.str());
    json j{{"models", cs.models},
           {"total", cs.total},
           {"share_january", cs.share_january},
           {"share_february", cs.share_february},
           {"share_other", cs.share_other}};
    json per = json::array();
    for (std::size_t i = 0; i < ok.size(); ++i) {
        json f = json::array();
        for (const auto& x : cs.per_model[i]) {
            f.push_back({{"month", x.month.to_string()}, {"type", outlierscan::type_name(x.type)}, {"t_stat", x.t_stat}});
        }
        per.push_back({{"orders", ok[i].spec.orders_string()}, {"findings", f}});
    }
    j["per_model"] = per;
    j["metadata"] = cx.metadata("outliers", notes);
    cx.write("census_summary.json", j.dump(2) + "\n");
    cx.log << "census: " << cs.total << " findings over " << cs.models << " models, Jan/Feb share "
           << cs.share_january + cs.share_february << '\n';
}

seasadj::SfRemoval fit_sf(const Context& cx) {
    if (cx.config.tau.nonzero() == 0) throw DataError("model.tau has no non-zero window");
    auto fo = cx.fit_options();
    fo.compute_std_errors = false;
    const auto m = sarimax::fit(cx.target, model_spec(cx.config, cx.target.range(), cx.table), fo);
    return seasadj::remove_sf(cx.target, m, cx.table);
}

void cmd_sf_effects(const Context& cx) {
    const auto r = fit_sf(cx);
    std::ostringstream os;
    os << "date,raw,sf_effect,adjusted\n";
    for (std::size_t t = 0; t < cx.target.size(); ++t) {
        os << cx.target.month_at(t).to_string() << ',' << io::format_double(cx.target[t]) << ','
           << io::format_double(r.effect[t]) << ',' << io::format_double(r.adjusted[t]) << '\n';
    }
    cx.write("sf_effects.csv", cx.header("sf-effects") + os.str());
    std::ostringstream rel;
    io::write_series_csv(rel, calendar::sf_relative_percentage(cx.target, r.effect), "relative_change");
    cx.write("sf_relative.csv", cx.header("sf-effects") + rel.str());
}

void cmd_seasadj(const Context& cx) {
    const auto& c = cx.config;
    MonthlySeries effect(cx.target.start(), std::vector<double>(cx.target.size(), 0.0));
    if (c.mode == seasadj::Mode::Additive && c.tau.nonzero() > 0) effect = fit_sf(cx).effect;
    const auto d = seasadj::decompose(cx.target, effect, c.mode);
    std::ostringstream os;
    seasadj::write_decomposition_csv(os, d);
    cx.write("decomposition.csv", cx.header("seasadj", {kX13Note, "mode " + seasadj::mode_name(c.mode)}) + os.str());
    if (const auto adj = cx.adjusted()) {
        std::ostringstream s;
        io::write_series_csv(s, seasadj::seasonality_from_adjusted(cx.target, *adj), "seasonal");
        cx.write("seasonality_official.csv", cx.header("seasadj", {"S = raw / official adjusted"}) + s.str());
    }
}

diffusion::DiConfig di_config(const Context& cx, const Panel& panel) {
    const auto& c = cx.config;
    diffusion::DiConfig d;
    d.grid = c.di_grid;
    d.mode = c.mode;
    d.table = cx.table;
    d.use_official_adjusted = c.use_official_adjusted;
    if (c.mode == seasadj::Mode::Additive && c.tau.nonzero() > 0) {
        d.sf_spec = model_spec(c, cx.target.range(), cx.table);
    }
    if (!c.transform_list.empty() && c.transform_list.size() != panel.names.size()) {
        throw DataError("di.transforms lists " + std::to_string(c.transform_list.size()) + " codes for " +
                        std::to_string(panel.names.size()) + " covariates");
    }
    for (std::size_t j = 0; j < panel.names.size(); ++j) {
        int code = c.transform_list.empty() ? c.default_transform : c.transform_list[j];
        if (const auto it = c.transform_by_name.find(panel.names[j]); it != c.transform_by_name.end()) code = it->second;
        d.transforms.push_back(timeseries::transform_from_int(code));
    }
    for (const auto& [name, code] : c.transform_by_name) {
        if (!panel.find(name)) throw DataError("di.transforms names unknown covariate '" + name + "'");
    }
    return d;
}

backtest::Dataset dataset(const Context& cx) {
    return {cx.target, cx.covariates(), cx.adjusted()};
}

void cmd_backtest(const Context& cx) {
    const auto& c = cx.config;
    const auto data = dataset(cx);
    const auto protocol = cx.protocol();
    const double sigma0 = selection::baseline_sigma(cx.target);
    for (const auto& engine : c.engines) {
        std::unique_ptr<backtest::Forecaster> f;
        if (engine == "sarimax") {
            auto fo = cx.fit_options();
            fo.compute_std_errors = false;
            f = std::make_unique<backtest::SarimaxForecaster>(model_spec(c, cx.target.range(), cx.table), cx.table, fo);
        } else {
            if (!data.covariates) throw DataError("the di engine needs data.covariates");
            f = std::make_unique<diffusion::DiForecaster>(di_config(cx, *data.covariates));
        }
        backtest::ReadLog log;
        backtest::RunOptions opt;
        opt.threads = c.threads;
        opt.log = &log;
        cx.log << "backtest " << engine << " (" << backtest::scheme_name(protocol.scheme) << ")\n" << std::flush;
        const auto rep = backtest::run(data, *f, protocol, sigma0, opt);
        std::vector<std::string> notes{"scheme " + backtest::scheme_name(protocol.scheme),
                                       "refit stride " + std::to_string(protocol.refit_stride),
                                       "reads past origin: " + std::to_string(log.violations())};
        if (protocol.scheme == backtest::Scheme::Rolling) {
            notes.push_back("rolling windows hold 49 - h months for every engine");
        }
        if (engine == "di") notes.push_back(kX13Note);
        std::ostringstream s, t;
        backtest::write_summary_csv(s, rep);
        backtest::write_trace_csv(t, rep);
        cx.write("backtest_" + engine + "_summary.csv", cx.header("backtest", notes) + s.str());
        cx.write("backtest_" + engine + "_trace.csv", cx.header("backtest", notes) + t.str());
        for (const auto& hr : rep.horizons) {
            std::ostringstream h;
            backtest::write_horizon_csv(h, hr);
            cx.write("backtest_" + engine + "_h" + std::to_string(hr.h) + ".csv", cx.header("backtest", notes) + h.str());
            cx.log << "  h=" << hr.h << " rmse=" << hr.rmse << " rmse/sigma0=" << hr.rmse_over_sigma0 << '\n';
        }
    }
}

void cmd_di_forecast(const Context& cx) {
    const auto data = dataset(cx);
    if (!data.covariates) throw DataError("di-forecast needs data.covariates");
    const auto cfg = di_config(cx, *data.covariates);
    const YearMonth origin = cx.target.end();
    const backtest::DataAccessor acc(data, origin);
    std::ostringstream os;
    os << "h,target,cpi,sa,seasonal,sf_effect,yh,k,p,m\n";
    std::optional<diffusion::FactorModel> factors;
    for (int h : cx.config.protocol.horizons) {
        const auto pr = diffusion::di_predict(acc, {cx.target.start(), origin}, h, cfg);
        os << h << ',' << (origin + h).to_string() << ',' << io::format_double(pr.cpi) << ',' << io::format_double(pr.sa)
           << ',' << io::format_double(pr.seasonal) << ',' << io::format_double(pr.sf_effect) << ','
           << io::format_double(pr.di.yh_hat) << ',' << pr.di.tuning.k << ',' << pr.di.tuning.p << ','
           << pr.di.tuning.m << '\n';
        if (!factors) factors = pr.factors;
    }
    cx.write("di_forecast.csv", cx.header("di-forecast", {kX13Note}) + os.str());
    std::ostringstream ld;
    diffusion::write_loadings_csv(ld, data.covariates->names, *factors);
    cx.write("loadings.csv",
             cx.header("di-forecast", {"loadings scaled so Lambda'Lambda/n = I; largest entry of each column positive"}) +
                 ld.str());
}

std::map<int, double> read_summary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read '" + path.string() + "'; run the backtest subcommand first");
    std::map<int, double> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (header) {
            header = false;
            continue;
        }
        const auto f = io::split_csv_line(line);
        if (f.size() < 2) throw DataError("malformed summary row in '" + path.string() + "'");
        out[std::stoi(f[0])] = std::stod(f[1]);
    }
    return out;
}

void cmd_report(const Context& cx) {
    const auto di = read_summary(cx.out / "backtest_di_summary.csv");
    const auto sx = read_summary(cx.out / "backtest_sarimax_summary.csv");
    if (di.size() != sx.size()) throw DataError("report: engines were run with different horizons");
    std::vector<backtest::HorizonRatio> ratios;
    for (const auto& [h, rmse] : di) {
        const auto it = sx.find(h);
        if (it == sx.end()) throw DataError("report: engines were run with different horizons");
        ratios.push_back({h, rmse / it->second});
    }
    std::ostringstream os;
    backtest::write_ratio_csv(os, ratios);
    cx.write("ratio.csv", cx.header("report", {"ratio = RMSE(di) / RMSE(sarimax)"}) + os.str());
}

}  // namespace

void run_subcommand(const std::string& name, const PipelineConfig& config, std::ostream& log) {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), name) == names.end()) throw DataError("unknown subcommand '" + name + "'");

    calendar::LunarTable table = calendar::LunarTable::embedded();
    if (!config.lunar_override_path.empty()) {
        table = table.merged_with(calendar::LunarTable::read_csv(resolve(config, config.lunar_override_path).string()));
    }
    auto target = io::read_series_csv(resolve(config, config.target_path).string());
    if (config.sample) target = target.slice(config.sample->first, config.sample->last);

    fs::path out = config.output_dir;
    if (out.is_relative()) out = fs::current_path() / out;
    fs::create_directories(out);
    const Context cx{config, log, out, std::move(table), std::move(target), config_hash(config)};

    if (name == "fit") cmd_fit(cx);
    else if (name == "grid") cmd_grid(cx);
    else if (name == "outliers") cmd_outliers(cx);
    else if (name == "sf-effects") cmd_sf_effects(cx);
    else if (name == "backtest") cmd_backtest(cx);
    else if (name == "seasadj") cmd_seasadj(cx);
    else if (name == "di-forecast") cmd_di_forecast(cx);
    else cmd_report(cx);
}

}  // namespace cpitk::pipeline
