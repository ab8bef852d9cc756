// SPDX-License-Identifier: Apache-2.0
#pragma once

// Experiment descriptions, their text format, the figure presets and the CSV
// runner behind the command-line tool.

#include "nfcrb/estimator.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace nfcrb {

enum class SweepAxis { M, Theta, Range, SnrDb };
enum class SweepKind { List, Linear, Geometric };

struct SweepSpec {
    SweepAxis axis = SweepAxis::M;
    SweepKind kind = SweepKind::List;
    std::vector<double> values;   // List
    double start = 0.0;           // Linear / Geometric
    double stop = 0.0;
    double step = 1.0;            // additive step, or ratio for Geometric

    bool operator==(const SweepSpec&) const = default;

    std::vector<double> points() const
    {
        if (kind == SweepKind::List) return values;
        std::vector<double> out;
        const double slack = 1e-9 * std::max(std::abs(start), std::abs(stop));
        if (kind == SweepKind::Linear) {
            if (!(step > 0.0)) throw ConfigError("sweep step must be positive");
            for (long i = 0;; ++i) {
                double v = start + i * step;
                if (v > stop + slack) break;
                out.push_back(v);
                if (out.size() > 100000) throw ConfigError("sweep has too many points");
            }
        } else {
            if (!(step > 1.0) || !(start > 0.0)) throw ConfigError("geometric sweep needs start > 0 and factor > 1");
            double v = start;
            for (long i = 0; v <= stop + slack; ++i) {
                out.push_back(v);
                v = start * std::pow(step, static_cast<double>(i + 1));
                if (out.size() > 100000) throw ConfigError("sweep has too many points");
            }
        }
        return out;
    }
};

struct MonteCarloConfig {
    bool enabled = false;
    Estimator estimator = Estimator::MatchedFieldML;
    int trials = 500;
    std::uint64_t seed = 1;
    // "crb": box of +-sigma_halfwidth standard deviations around the truth;
    // "box": +-theta_halfwidth_deg and +-range_fraction*r with fixed counts.
    std::string grid = "crb";
    double sigma_halfwidth = 6.0;
    double cells_per_sigma = 2.0;
    double theta_halfwidth_deg = 5.0;
    double range_fraction = 0.2;
    int theta_points = 181;
    int range_points = 121;
    int refine_levels = 3;
    int snapshots = 64;
    double loading = 1e-3;

    bool operator==(const MonteCarloConfig&) const = default;
};

struct ExperimentConfig {
    std::string name = "custom";
    std::string description;

    std::vector<Mode> modes{Mode::MIMO};
    Topology topology = Topology::Monostatic;
    int num_tx = 9;
    int num_rx = 1;
    double tx_spacing = 0.0628;
    double rx_spacing = 0.0628;
    double array_separation = 0.0;
    double theta_deg = 30.0;
    double range = 10.0;
    double snr_db = 0.0;
    double time_bandwidth = 1.0;
    double carrier_freq = 2.37e9;

    SweepSpec sweep;
    std::vector<Method> methods{Method::ClosedForm};
    Regime regime = Regime::InfiniteAperture;
    MonteCarloConfig mc;

    bool operator==(const ExperimentConfig&) const = default;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Text format

namespace detail {

inline std::string trim(std::string_view s)
{
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    std::size_t e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string lower(std::string s)
{
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct RawValue {
    std::string text;
    int line = 0;   // 0 for command-line overrides
    bool used = false;
};

using RawConfig = std::map<std::string, std::map<std::string, RawValue>>;

inline std::string where(const RawValue& v, const std::string& section, const std::string& key)
{
    std::string loc = v.line > 0 ? "line " + std::to_string(v.line) : "--set";
    return loc + ": " + section + "." + key;
}

class Reader {
public:
    explicit Reader(RawConfig& raw) : raw_(raw) {}

    RawValue* find(const std::string& section, const std::string& key)
    {
        auto s = raw_.find(section);
        if (s == raw_.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        k->second.used = true;
        return &k->second;
    }

    bool has(const std::string& section, const std::string& key)
    {
        auto s = raw_.find(section);
        return s != raw_.end() && s->second.count(key);
    }

    template <class T, class Parse>
    void read(const std::string& section, const std::string& key, T& out, Parse&& parse)
    {
        if (RawValue* v = find(section, key)) {
            try {
                out = parse(v->text);
            } catch (const ConfigError& e) {
                throw ConfigError(where(*v, section, key) + ": " + e.what());
            }
        }
    }

    void real(const std::string& section, const std::string& key, double& out)
    {
        read(section, key, out, parse_real);
    }

    void integer(const std::string& section, const std::string& key, int& out)
    {
        read(section, key, out, [](const std::string& t) {
            int v = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("expected an integer, got '" + t + "'");
            return v;
        });
    }

    static double parse_real(const std::string& t)
    {
        std::string s = lower(t);
        if (s == "inf") return inf;
        double v = 0.0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("expected a number, got '" + t + "'");
        return v;
    }

    void reject_unused() const
    {
        for (const auto& [section, keys] : raw_)
            for (const auto& [key, v] : keys)
                if (!v.used) throw ConfigError(where(v, section, key) + ": unknown key");
    }

private:
    RawConfig& raw_;
};

inline Mode parse_mode(const std::string& t)
{
    std::string s = lower(t);
    if (s == "mimo") return Mode::MIMO;
    if (s == "phased") return Mode::Phased;
    throw ConfigError("unknown mode '" + t + "' (MIMO | Phased)");
}

inline Topology parse_topology(const std::string& t)
{
    std::string s = lower(t);
    if (s == "monostatic") return Topology::Monostatic;
    if (s == "bistatic" || s == "bistaticnearfartx") return Topology::BistaticNearFarTx;
    throw ConfigError("unknown topology '" + t + "' (monostatic | bistatic)");
}

inline Method parse_method(const std::string& t)
{
    for (Method m : {Method::NumericalFim, Method::ExactSumQ, Method::ClosedForm, Method::Asymptotic, Method::Taylor,
                     Method::FarFieldUPW})
        if (lower(std::string(to_string(m))) == lower(t)) return m;
    throw ConfigError("unknown method '" + t + "'");
}

inline Regime parse_regime(const std::string& t)
{
    std::string s = lower(t);
    for (Regime r : {Regime::LargeAperture, Regime::InfiniteAperture, Regime::SmallAperture})
        if (s == to_string(r)) return r;
    throw ConfigError("unknown regime '" + t + "' (large | infinite | small)");
}

inline SweepAxis parse_axis(const std::string& t)
{
    std::string s = lower(t);
    if (s == "m") return SweepAxis::M;
    if (s == "theta") return SweepAxis::Theta;
    if (s == "r") return SweepAxis::Range;
    if (s == "snr_db") return SweepAxis::SnrDb;
    throw ConfigError("unknown sweep axis '" + t + "' (M | theta | r | snr_db)");
}

inline std::string_view axis_name(SweepAxis a)
{
    switch (a) {
    case SweepAxis::M: return "M";
    case SweepAxis::Theta: return "theta";
    case SweepAxis::Range: return "r";
    case SweepAxis::SnrDb: return "snr_db";
    }
    return "?";
}

inline Estimator parse_estimator(const std::string& t)
{
    std::string s = lower(t);
    if (s == "capon") return Estimator::Capon;
    if (s == "matchedfieldml" || s == "ml") return Estimator::MatchedFieldML;
    throw ConfigError("unknown estimator '" + t + "' (MatchedFieldML | Capon)");
}

inline bool parse_bool(const std::string& t)
{
    std::string s = lower(t);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("expected true/false, got '" + t + "'");
}

inline RawConfig parse_raw(std::istream& in)
{
    RawConfig raw;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = lower(trim(std::string_view(t).substr(1, t.size() - 2)));
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside of a section");
        std::string key = trim(std::string_view(t).substr(0, eq));
        std::string value = trim(std::string_view(t).substr(eq + 1));
        if (raw[section].count(key))
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + section + "." + key);
        raw[section][key] = {value, lineno, false};
    }
    return raw;
}

// "section.key=value", or "key=value" when the key name is unique across the
// known sections.
inline void apply_override(RawConfig& raw, const std::string& assignment)
{
    static const std::map<std::string, std::vector<std::string>> known = {
        {"meta", {"name", "description"}},
        {"scenario", {"modes", "topology", "M", "N", "d_tx_m", "d_rx_m", "R_m", "theta_deg", "r_m", "snr_db", "L",
                      "carrier_hz"}},
        {"sweep", {"axis", "values", "start", "stop", "step", "factor"}},
        {"methods", {"list", "regime"}},
        {"montecarlo", {"enabled", "estimator", "K", "seed", "grid", "sigma_halfwidth", "cells_per_sigma",
                        "theta_halfwidth_deg", "range_fraction", "theta_points", "range_points", "refine_levels",
                        "snapshots", "loading"}},
    };
    auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + assignment + "'");
    std::string lhs = trim(std::string_view(assignment).substr(0, eq));
    std::string value = trim(std::string_view(assignment).substr(eq + 1));
    std::string section, key;
    if (auto dot = lhs.find('.'); dot != std::string::npos) {
        section = lower(lhs.substr(0, dot));
        key = lhs.substr(dot + 1);
    } else {
        for (const auto& [sec, keys] : known)
            for (const auto& k : keys)
                if (k == lhs) {
                    if (!section.empty()) throw ConfigError("--set key '" + lhs + "' is ambiguous; use section.key");
                    section = sec;
                }
        if (section.empty()) throw ConfigError("--set key '" + lhs + "' is unknown");
        key = lhs;
    }
    // A sweep given one way on the command line replaces the file's form.
    if (section == "sweep" && (key == "values" || key == "step" || key == "factor"))
        for (const char* k : {"values", "step", "factor"}) raw[section].erase(k);
    raw[section][key] = {value, 0, false};
}

} // namespace detail

inline ExperimentConfig config_from_raw(detail::RawConfig raw)
{
    using detail::Reader;
    Reader rd(raw);
    ExperimentConfig cfg;
    rd.read("meta", "name", cfg.name, [](const std::string& t) { return t; });
    rd.read("meta", "description", cfg.description, [](const std::string& t) { return t; });

    rd.read("scenario", "modes", cfg.modes, [](const std::string& t) {
        std::vector<Mode> out;
        for (const auto& item : detail::split_list(t)) out.push_back(detail::parse_mode(item));
        if (out.empty()) throw ConfigError("at least one mode is required");
        return out;
    });
    rd.read("scenario", "topology", cfg.topology, detail::parse_topology);
    rd.integer("scenario", "M", cfg.num_tx);
    rd.integer("scenario", "N", cfg.num_rx);
    rd.real("scenario", "d_tx_m", cfg.tx_spacing);
    rd.real("scenario", "d_rx_m", cfg.rx_spacing);
    rd.real("scenario", "R_m", cfg.array_separation);
    rd.real("scenario", "theta_deg", cfg.theta_deg);
    rd.real("scenario", "r_m", cfg.range);
    rd.real("scenario", "snr_db", cfg.snr_db);
    rd.real("scenario", "L", cfg.time_bandwidth);
    rd.real("scenario", "carrier_hz", cfg.carrier_freq);

    rd.read("sweep", "axis", cfg.sweep.axis, detail::parse_axis);
    const bool has_values = rd.has("sweep", "values"), has_step = rd.has("sweep", "step"),
               has_factor = rd.has("sweep", "factor");
    if (has_values + has_step + has_factor > 1) throw ConfigError("sweep: give exactly one of values, step, factor");
    if (has_values) {
        cfg.sweep.kind = SweepKind::List;
        rd.read("sweep", "values", cfg.sweep.values, [](const std::string& t) {
            std::vector<double> out;
            for (const auto& item : detail::split_list(t)) out.push_back(Reader::parse_real(item));
            return out;
        });
    } else if (has_step || has_factor) {
        cfg.sweep.kind = has_step ? SweepKind::Linear : SweepKind::Geometric;
        if (!rd.has("sweep", "start") || !rd.has("sweep", "stop")) throw ConfigError("sweep: start and stop are required");
        rd.real("sweep", "start", cfg.sweep.start);
        rd.real("sweep", "stop", cfg.sweep.stop);
        rd.real("sweep", has_step ? "step" : "factor", cfg.sweep.step);
    } else if (rd.has("sweep", "start") || rd.has("sweep", "stop")) {
        throw ConfigError("sweep: start/stop need a step or factor");
    }

    rd.read("methods", "list", cfg.methods, [](const std::string& t) {
        std::vector<Method> out;
        for (const auto& item : detail::split_list(t)) out.push_back(detail::parse_method(item));
        return out;
    });
    rd.read("methods", "regime", cfg.regime, detail::parse_regime);

    auto& mc = cfg.mc;
    rd.read("montecarlo", "enabled", mc.enabled, detail::parse_bool);
    rd.read("montecarlo", "estimator", mc.estimator, detail::parse_estimator);
    rd.integer("montecarlo", "K", mc.trials);
    rd.read("montecarlo", "seed", mc.seed, [](const std::string& t) {
        std::uint64_t v = 0;
        auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size()) throw ConfigError("expected an unsigned integer seed");
        return v;
    });
    rd.read("montecarlo", "grid", mc.grid, [](const std::string& t) {
        std::string s = detail::lower(t);
        if (s != "crb" && s != "box") throw ConfigError("grid must be crb or box");
        return s;
    });
    rd.real("montecarlo", "sigma_halfwidth", mc.sigma_halfwidth);
    rd.real("montecarlo", "cells_per_sigma", mc.cells_per_sigma);
    rd.real("montecarlo", "theta_halfwidth_deg", mc.theta_halfwidth_deg);
    rd.real("montecarlo", "range_fraction", mc.range_fraction);
    rd.integer("montecarlo", "theta_points", mc.theta_points);
    rd.integer("montecarlo", "range_points", mc.range_points);
    rd.integer("montecarlo", "refine_levels", mc.refine_levels);
    rd.integer("montecarlo", "snapshots", mc.snapshots);
    rd.real("montecarlo", "loading", mc.loading);

    rd.reject_unused();
    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config(std::istream& in, const std::vector<std::string>& overrides = {})
{
    detail::RawConfig raw = detail::parse_raw(in);
    for (const auto& o : overrides) detail::apply_override(raw, o);
    return config_from_raw(std::move(raw));
}

inline ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides = {})
{
    std::istringstream in(text);
    return parse_config(in, overrides);
}

inline std::string serialize_config(const ExperimentConfig& cfg)
{
    using detail::fmt_double;
    std::ostringstream o;
    auto join = [](const auto& items, auto&& fn) {
        std::string s;
        for (const auto& it : items) {
            if (!s.empty()) s += ',';
            s += fn(it);
        }
        return s;
    };
    o << "[meta]\n";
    o << "name = " << cfg.name << "\n";
    o << "description = " << cfg.description << "\n\n";
    o << "[scenario]\n";
    o << "modes = " << join(cfg.modes, [](Mode m) { return std::string(to_string(m)); }) << "\n";
    o << "topology = " << (cfg.topology == Topology::Monostatic ? "monostatic" : "bistatic") << "\n";
    o << "M = " << cfg.num_tx << "\n";
    o << "N = " << cfg.num_rx << "\n";
    o << "d_tx_m = " << fmt_double(cfg.tx_spacing) << "\n";
    o << "d_rx_m = " << fmt_double(cfg.rx_spacing) << "\n";
    o << "R_m = " << fmt_double(cfg.array_separation) << "\n";
    o << "theta_deg = " << fmt_double(cfg.theta_deg) << "\n";
    o << "r_m = " << fmt_double(cfg.range) << "\n";
    o << "snr_db = " << fmt_double(cfg.snr_db) << "\n";
    o << "L = " << fmt_double(cfg.time_bandwidth) << "\n";
    o << "carrier_hz = " << fmt_double(cfg.carrier_freq) << "\n\n";
    o << "[sweep]\n";
    o << "axis = " << detail::axis_name(cfg.sweep.axis) << "\n";
    switch (cfg.sweep.kind) {
    case SweepKind::List:
        o << "values = " << join(cfg.sweep.values, [](double v) { return fmt_double(v); }) << "\n";
        break;
    case SweepKind::Linear:
    case SweepKind::Geometric:
        o << "start = " << fmt_double(cfg.sweep.start) << "\n";
        o << "stop = " << fmt_double(cfg.sweep.stop) << "\n";
        o << (cfg.sweep.kind == SweepKind::Linear ? "step = " : "factor = ") << fmt_double(cfg.sweep.step) << "\n";
        break;
    }
    o << "\n[methods]\n";
    o << "list = " << join(cfg.methods, [](Method m) { return std::string(to_string(m)); }) << "\n";
    o << "regime = " << to_string(cfg.regime) << "\n\n";
    const auto& mc = cfg.mc;
    o << "[montecarlo]\n";
    o << "enabled = " << (mc.enabled ? "true" : "false") << "\n";
    o << "estimator = " << to_string(mc.estimator) << "\n";
    o << "K = " << mc.trials << "\n";
    o << "seed = " << mc.seed << "\n";
    o << "grid = " << mc.grid << "\n";
    o << "sigma_halfwidth = " << fmt_double(mc.sigma_halfwidth) << "\n";
    o << "cells_per_sigma = " << fmt_double(mc.cells_per_sigma) << "\n";
    o << "theta_halfwidth_deg = " << fmt_double(mc.theta_halfwidth_deg) << "\n";
    o << "range_fraction = " << fmt_double(mc.range_fraction) << "\n";
    o << "theta_points = " << mc.theta_points << "\n";
    o << "range_points = " << mc.range_points << "\n";
    o << "refine_levels = " << mc.refine_levels << "\n";
    o << "snapshots = " << mc.snapshots << "\n";
    o << "loading = " << fmt_double(mc.loading) << "\n";
    return o.str();
}

inline void ExperimentConfig::validate() const
{
    if (name.empty() || name.find_first_of("\n\r") != std::string::npos) throw ConfigError("meta.name is invalid");
    if (description.find_first_of("\n\r") != std::string::npos) throw ConfigError("meta.description must be one line");
    if (modes.empty()) throw ConfigError("scenario.modes is empty");
    if (methods.empty()) throw ConfigError("methods.list is empty");
    if (num_tx < 1 || num_rx < 1) throw ConfigError("scenario.M and scenario.N must be >= 1");
    if (!(tx_spacing > 0) || !(rx_spacing > 0)) throw ConfigError("element spacings must be positive");
    if (!(range > 0)) throw ConfigError("scenario.r_m must be positive");
    if (!(std::abs(theta_deg) <= 90.0)) throw ConfigError("scenario.theta_deg must lie in [-90, 90]");
    if (!(time_bandwidth >= 1.0)) throw ConfigError("scenario.L must be >= 1");
    if (!(carrier_freq > 0)) throw ConfigError("scenario.carrier_hz must be positive");
    if (topology == Topology::Monostatic && array_separation != 0.0)
        throw ConfigError("monostatic scenarios need R_m = 0");
    if (topology == Topology::BistaticNearFarTx && !(array_separation > 0.0))
        throw ConfigError("bistatic scenarios need R_m > 0");
    sweep.points();   // throws on malformed ranges

    const bool theta_varies = sweep.axis == SweepAxis::Theta;
    for (Method m : methods) {
        for (Mode mode : modes) {
            if (m == Method::Taylor && topology != Topology::Monostatic)
                throw ConfigError("Taylor bounds are only defined for the monostatic topology");
            if (m == Method::FarFieldUPW && topology != Topology::Monostatic && mode == Mode::Phased)
                throw ConfigError("no plane-wave reference for bistatic phased sensing");
            if (m == Method::Asymptotic && topology != Topology::Monostatic && mode == Mode::MIMO) {
                if (regime == Regime::LargeAperture) throw ConfigError("no large-aperture form for the bistatic topology");
                if (theta_varies || theta_deg != 0.0) throw ConfigError("bistatic asymptotic forms need theta = 0");
            }
        }
    }
    if (mc.enabled) {
        if (mc.trials < 1) throw ConfigError("montecarlo.K must be >= 1");
        if (mc.refine_levels < 0) throw ConfigError("montecarlo.refine_levels must be >= 0");
        if (mc.theta_points < 2 || mc.range_points < 2) throw ConfigError("montecarlo grid needs >= 2 points per axis");
        if (!(mc.sigma_halfwidth > 0) || !(mc.cells_per_sigma > 0)) throw ConfigError("montecarlo CRB grid is invalid");
        if (!(mc.theta_halfwidth_deg > 0) || !(mc.range_fraction > 0 && mc.range_fraction < 1))
            throw ConfigError("montecarlo box grid is invalid");
        if (mc.estimator == Estimator::Capon && mc.snapshots < 2) throw ConfigError("Capon needs >= 2 snapshots");
        if (!(mc.loading >= 0)) throw ConfigError("montecarlo.loading must be >= 0");
        for (Mode mode : modes)
            if (topology != Topology::Monostatic && mode == Mode::Phased)
                throw ConfigError("Monte Carlo is meaningless for bistatic phased sensing (unidentifiable)");
    }
}

// ---------------------------------------------------------------------------
// Presets

inline std::vector<double> doubling_odd(int first, int last)
{
    std::vector<double> out;
    for (int m = first; m <= last; m = 2 * m - 1) out.push_back(m);
    return out;
}

inline std::vector<ExperimentConfig> presets()
{
    const std::vector<Method> all = {Method::ClosedForm, Method::ExactSumQ, Method::NumericalFim,
                                     Method::Asymptotic,  Method::Taylor,    Method::FarFieldUPW};
    std::vector<ExperimentConfig> out;

    ExperimentConfig m_sweep;
    m_sweep.modes = {Mode::MIMO, Mode::Phased};
    m_sweep.theta_deg = 30.0;
    m_sweep.range = 10.0;
    m_sweep.sweep = {SweepAxis::M, SweepKind::List, doubling_odd(9, 1025)};
    m_sweep.methods = all;
    m_sweep.regime = Regime::InfiniteAperture;
    for (const char* n : {"fig2", "fig3"}) {
        ExperimentConfig c = m_sweep;
        c.name = n;
        c.description = std::string(n) == "fig2" ? "angle CRB vs M, monostatic, r = 10 m, theta = 30 deg"
                                                 : "range CRB vs M, monostatic, r = 10 m, theta = 30 deg";
        out.push_back(c);
    }

    // The figures use 1024 elements; the runner rounds to 1025 and flags it.
    ExperimentConfig t_sweep;
    t_sweep.modes = {Mode::MIMO, Mode::Phased};
    t_sweep.num_tx = 1024;
    t_sweep.range = 10.0;
    t_sweep.sweep = {SweepAxis::Theta, SweepKind::Linear, {}, -75.0, 75.0, 5.0};
    t_sweep.methods = {Method::ClosedForm, Method::ExactSumQ, Method::NumericalFim, Method::Taylor, Method::FarFieldUPW};
    for (const char* n : {"fig4", "fig5"}) {
        ExperimentConfig c = t_sweep;
        c.name = n;
        c.description = std::string(n) == "fig4" ? "angle CRB vs theta, monostatic, M = 1024, r = 10 m"
                                                 : "range CRB vs theta, monostatic, M = 1024, r = 10 m";
        out.push_back(c);
    }

    ExperimentConfig r_sweep;
    r_sweep.modes = {Mode::MIMO, Mode::Phased};
    r_sweep.num_tx = 1024;
    r_sweep.theta_deg = 30.0;
    // 2 m to 2 km, eight points per decade
    r_sweep.sweep = {SweepAxis::Range, SweepKind::Geometric, {}, 2.0, 2000.0, std::pow(10.0, 0.125)};
    r_sweep.methods = {Method::ClosedForm, Method::ExactSumQ, Method::NumericalFim, Method::Taylor, Method::FarFieldUPW};
    for (const char* n : {"fig6", "fig7"}) {
        ExperimentConfig c = r_sweep;
        c.name = n;
        c.description = std::string(n) == "fig6" ? "angle CRB vs r, monostatic, M = 1024, theta = 30 deg"
                                                 : "range CRB vs r, monostatic, M = 1024, theta = 30 deg";
        out.push_back(c);
    }

    ExperimentConfig bi;
    bi.modes = {Mode::MIMO};
    bi.topology = Topology::BistaticNearFarTx;
    bi.num_rx = 8;
    bi.array_separation = 35.0;
    bi.theta_deg = 0.0;
    bi.range = 18.0;
    bi.sweep = {SweepAxis::M, SweepKind::List, doubling_odd(9, 1025)};
    bi.methods = {Method::ClosedForm, Method::ExactSumQ, Method::NumericalFim, Method::FarFieldUPW};
    bi.mc.enabled = true;
    bi.mc.trials = 500;
    bi.mc.seed = 2024;
    for (const char* n : {"fig8", "fig9"}) {
        ExperimentConfig c = bi;
        c.name = n;
        c.description = std::string(n) == "fig8" ? "angle CRB and RMSE vs M, bistatic, N = 8, r = 18 m, R = 35 m"
                                                 : "range CRB and RMSE vs M, bistatic, N = 8, r = 18 m, R = 35 m";
        out.push_back(c);
    }
    return out;
}

inline std::optional<ExperimentConfig> find_preset(const std::string& name)
{
    for (auto& p : presets())
        if (p.name == name) return p;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Runner

struct RunOptions {
    bool db = false;
    unsigned threads = 0;
};

inline CrbResult compute_crb(Method method, const ArrayGeometry& geom, const TargetLocation& tgt,
                             const CarrierConfig& carrier, const NoiseAndPowerConfig& cfg, Mode mode,
                             Topology topology, Regime regime)
{
    switch (method) {
    case Method::NumericalFim: return crb_numerical_fim(geom, tgt, carrier, cfg, mode, topology);
    case Method::ExactSumQ: return crb_exact_sum(geom, tgt, carrier, cfg, mode, topology);
    case Method::ClosedForm: return crb_closed_form(geom, tgt, carrier, cfg, mode, topology);
    case Method::Asymptotic: return crb_asymptotic(geom, tgt, carrier, cfg, regime, mode, topology);
    case Method::Taylor: return crb_taylor(geom, tgt, carrier, cfg, mode);
    case Method::FarFieldUPW: return crb_farfield_upw(geom, tgt, carrier, cfg, mode, topology);
    }
    throw DomainError("unknown method");
}

struct SweepPoint {
    ArrayGeometry geom;
    TargetLocation target;
    double snr_db = 0.0;
    WarningSet warnings = warn_none;
};

inline SweepPoint make_point(const ExperimentConfig& cfg, double value)
{
    SweepPoint p;
    p.geom.num_tx = cfg.num_tx;
    p.geom.num_rx = cfg.topology == Topology::Monostatic ? cfg.num_tx : cfg.num_rx;
    p.geom.tx_spacing = cfg.tx_spacing;
    p.geom.rx_spacing = cfg.topology == Topology::Monostatic ? cfg.tx_spacing : cfg.rx_spacing;
    p.geom.array_separation = cfg.array_separation;
    p.target = {cfg.theta_deg * pi / 180.0, cfg.range};
    p.snr_db = cfg.snr_db;
    switch (cfg.sweep.axis) {
    case SweepAxis::M: {
        if (!(value >= 1.0) || value != std::floor(value)) throw ConfigError("sweep over M needs positive integers");
        p.geom.num_tx = static_cast<int>(value);
        break;
    }
    case SweepAxis::Theta: p.target.angle = value * pi / 180.0; break;
    case SweepAxis::Range: p.target.range = value; break;
    case SweepAxis::SnrDb: p.snr_db = value; break;
    }
    if (p.geom.num_tx % 2 == 0) {
        ++p.geom.num_tx;
        p.warnings |= warn_rounded_to_odd;
    }
    if (cfg.topology == Topology::Monostatic) p.geom.num_rx = p.geom.num_tx;
    return p;
}

namespace detail {

inline std::string csv_real(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    return fmt_double(v);
}

inline std::string csv_crb(double v, bool db)
{
    if (!db) return csv_real(v);
    if (std::isinf(v)) return "inf";
    return csv_real(linear_to_db(v));
}

} // namespace detail

struct RmseColumns {
    double rmse_theta = 0.0;
    double rmse_range = 0.0;
};

inline GridSpec monte_carlo_grid(const MonteCarloConfig& mc, const TargetLocation& truth, const CrbResult& crb)
{
    if (mc.grid == "crb")
        return crb_scaled_grid(truth, crb, mc.sigma_halfwidth, mc.cells_per_sigma, mc.refine_levels);
    GridSpec g;
    const double half = mc.theta_halfwidth_deg * pi / 180.0;
    g.theta_min = truth.angle - half;
    g.theta_max = truth.angle + half;
    g.theta_points = mc.theta_points;
    g.range_min = truth.range * (1.0 - mc.range_fraction);
    g.range_max = truth.range * (1.0 + mc.range_fraction);
    g.range_points = mc.range_points;
    g.refine_levels = mc.refine_levels;
    return g;
}

// Writes comment lines, the header and one row per (sweep point, mode,
// method). Rows are computed in parallel but always emitted in sweep order.
inline void run_experiment(const ExperimentConfig& cfg, std::ostream& os, const RunOptions& opt = {})
{
    cfg.validate();
    const std::vector<double> values = cfg.sweep.points();
    CarrierConfig carrier{cfg.carrier_freq};

    os << "# nfcrb experiment: " << cfg.name << "\n";
    if (!cfg.description.empty()) os << "# " << cfg.description << "\n";
    os << "# sweep: " << detail::axis_name(cfg.sweep.axis) << " over " << values.size() << " points";
    switch (cfg.sweep.kind) {
    case SweepKind::List: {
        os << ", values";
        const char* sep = " ";
        for (double v : cfg.sweep.values) {
            os << sep << detail::fmt_double(v);
            sep = ", ";
        }
        break;
    }
    case SweepKind::Linear:
        os << ", " << detail::fmt_double(cfg.sweep.start) << " to " << detail::fmt_double(cfg.sweep.stop) << " step "
           << detail::fmt_double(cfg.sweep.step);
        break;
    case SweepKind::Geometric:
        os << ", " << detail::fmt_double(cfg.sweep.start) << " to " << detail::fmt_double(cfg.sweep.stop) << " factor "
           << detail::fmt_double(cfg.sweep.step);
        break;
    }
    if (cfg.sweep.axis == SweepAxis::Theta) os << " (given in degrees, written in radians)";
    os << "\n";
    os << "# units: theta in rad, r and spacings in m, "
       << (opt.db ? "CRBs in dB (10 log10 of rad^2 and m^2)" : "crb_theta in rad^2, crb_r in m^2") << "\n";
    if (cfg.mc.enabled)
        os << "# monte carlo: " << to_string(cfg.mc.estimator) << ", K = " << cfg.mc.trials
           << ", seed = " << cfg.mc.seed << ", grid = " << cfg.mc.grid << "\n";

    os << "method,mode,topology,M,N,d_tx_m,d_rx_m,R_m,theta_rad,r_m,snr_db,L,"
       << (opt.db ? "crb_theta_db,crb_r_db" : "crb_theta_rad2,crb_r_m2") << ",identifiable,warnings";
    if (cfg.mc.enabled) os << ",rmse_theta_rad,rmse_r_m";
    os << "\n";

    const std::size_t nmodes = cfg.modes.size();
    std::vector<std::string> blocks(values.size() * nmodes);
    auto eval = [&](std::size_t idx) {
        const double value = values[idx / nmodes];
        const Mode mode = cfg.modes[idx % nmodes];
        SweepPoint p = make_point(cfg, value);
        NoiseAndPowerConfig power = NoiseAndPowerConfig::from_snr_db(p.snr_db, cfg.time_bandwidth);

        std::optional<RmseColumns> rmse;
        if (cfg.mc.enabled) {
            Scenario sc{p.geom, p.target, carrier, mode, cfg.topology};
            CrbResult ref = crb_closed_form(p.geom, p.target, carrier, power, mode, cfg.topology);
            GridSpec grid = monte_carlo_grid(cfg.mc, p.target, ref);
            MonteCarloOptions mco;
            mco.capon_snapshots = cfg.mc.snapshots;
            mco.capon_loading = cfg.mc.loading;
            mco.threads = opt.threads;
            RmseReport rep = monte_carlo_rmse(sc, power, cfg.mc.estimator, grid, cfg.mc.trials,
                                              substream_seed(cfg.mc.seed, idx), mco);
            rmse = RmseColumns{rep.rmse_theta, rep.rmse_range};
        }

        std::string block;
        for (Method m : cfg.methods) {
            CrbResult res = compute_crb(m, p.geom, p.target, carrier, power, mode, cfg.topology, cfg.regime);
            WarningSet w = res.warnings | p.warnings;
            std::string row;
            row += std::string(to_string(m)) + ',' + std::string(to_string(mode)) + ',' +
                   std::string(to_string(cfg.topology)) + ',';
            row += std::to_string(p.geom.num_tx) + ',' +
                   std::to_string(cfg.topology == Topology::Monostatic ? p.geom.num_tx : p.geom.num_rx) + ',';
            row += detail::csv_real(p.geom.tx_spacing) + ',' + detail::csv_real(p.geom.rx_spacing) + ',' +
                   detail::csv_real(p.geom.array_separation) + ',';
            row += detail::csv_real(p.target.angle) + ',' + detail::csv_real(p.target.range) + ',' +
                   detail::csv_real(p.snr_db) + ',' + detail::csv_real(cfg.time_bandwidth) + ',';
            row += detail::csv_crb(res.crb_theta, opt.db) + ',' + detail::csv_crb(res.crb_range, opt.db) + ',';
            row += std::string(res.identifiable ? "true" : "false") + ',' + warnings_to_string(w);
            if (rmse) row += ',' + detail::csv_real(rmse->rmse_theta) + ',' + detail::csv_real(rmse->rmse_range);
            block += row + '\n';
        }
        blocks[idx] = std::move(block);
    };
    // Monte Carlo parallelises over trials; otherwise over sweep points.
    parallel_for(blocks.size(), eval, cfg.mc.enabled ? 1u : opt.threads);
    for (const auto& b : blocks) os << b;
}

} // namespace nfcrb
