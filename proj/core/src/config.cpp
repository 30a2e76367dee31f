#include "mbcool/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mbcool/errors.hpp"

namespace mbcool {

namespace {

using nlohmann::json;

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const char* context) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError(std::string("unknown key '") + item.key() + "' in " +
                              context);
    }
}

double get_number(const json& obj, const char* key, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number())
        throw ConfigError(std::string("'") + key + "' must be a number");
    return v.get<double>();
}

long long get_integer(const json& obj, const char* key, long long fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ConfigError(std::string("'") + key + "' must be an integer");
    return v.get<long long>();
}

std::uint64_t get_u64(const json& obj, const char* key, std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ConfigError(std::string("'") + key + "' must be a nonnegative integer");
    if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)
        throw ConfigError(std::string("'") + key + "' must be a nonnegative integer");
    return v.get<std::uint64_t>();
}

std::string get_string(const json& obj, const char* key, const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string())
        throw ConfigError(std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean())
        throw ConfigError(std::string("'") + key + "' must be a boolean");
    return v.get<bool>();
}

Transition get_transition(const json& obj, const char* key, Transition fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return transition_from_string(get_string(obj, key, ""));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

RapPulse parse_pulse(const json& obj, const RapPulse& defaults, const char* context) {
    require_keys(obj,
                 {"duration_s", "peak_rabi_hz", "chirp_range_hz", "sideband_order",
                  "n_time_samples"},
                 context);
    RapPulse p = defaults;
    p.duration_s = get_number(obj, "duration_s", p.duration_s);
    p.peak_rabi_hz = get_number(obj, "peak_rabi_hz", p.peak_rabi_hz);
    p.chirp_range_hz = get_number(obj, "chirp_range_hz", p.chirp_range_hz);
    p.sideband_order =
        static_cast<int>(get_integer(obj, "sideband_order", p.sideband_order));
    p.n_time_samples =
        static_cast<int>(get_integer(obj, "n_time_samples", p.n_time_samples));
    return p;
}

json pulse_to_json(const RapPulse& p) {
    return json{{"duration_s", p.duration_s},
                {"peak_rabi_hz", p.peak_rabi_hz},
                {"chirp_range_hz", p.chirp_range_hz},
                {"sideband_order", p.sideband_order},
                {"n_time_samples", p.n_time_samples}};
}

RunConfig from_json(const json& root) {
    if (!root.is_object()) throw ConfigError("config root must be a JSON object");
    require_keys(root,
                 {"mode", "protocol", "scale_mode", "sweep", "rabi", "fit", "seed",
                  "out_dir", "verbosity"},
                 "config root");

    RunConfig cfg;

    if (root.contains("mode")) {
        const json& m = root.at("mode");
        if (!m.is_object()) throw ConfigError("'mode' must be an object");
        require_keys(m, {"trap_frequency_hz", "lamb_dicke", "omega0_hz", "n_max"},
                     "mode");
        cfg.mode.trap_frequency_hz =
            get_number(m, "trap_frequency_hz", cfg.mode.trap_frequency_hz);
        cfg.mode.lamb_dicke = get_number(m, "lamb_dicke", cfg.mode.lamb_dicke);
        cfg.mode.omega0_hz = get_number(m, "omega0_hz", cfg.mode.omega0_hz);
        cfg.mode.n_max = static_cast<int>(get_integer(m, "n_max", cfg.mode.n_max));
    }

    if (root.contains("protocol")) {
        const json& p = root.at("protocol");
        if (!p.is_object()) throw ConfigError("'protocol' must be an object");
        require_keys(p,
                     {"nbar", "cycles", "detection_time_s", "detection_fidelity",
                      "heating_rate_hz", "shots", "carrier_pulse", "sideband_pulse"},
                     "protocol");
        cfg.protocol.nbar = get_number(p, "nbar", cfg.protocol.nbar);
        cfg.protocol.cycles_m =
            static_cast<int>(get_integer(p, "cycles", cfg.protocol.cycles_m));
        cfg.protocol.detection_time_s =
            get_number(p, "detection_time_s", cfg.protocol.detection_time_s);
        cfg.protocol.detection_fidelity =
            get_number(p, "detection_fidelity", cfg.protocol.detection_fidelity);
        cfg.protocol.heating_rate_hz =
            get_number(p, "heating_rate_hz", cfg.protocol.heating_rate_hz);
        cfg.protocol.shots = get_integer(p, "shots", cfg.protocol.shots);
        if (p.contains("carrier_pulse")) {
            if (!p.at("carrier_pulse").is_object())
                throw ConfigError("'carrier_pulse' must be an object");
            cfg.protocol.carrier_pulse = parse_pulse(
                p.at("carrier_pulse"), cfg.protocol.carrier_pulse, "carrier_pulse");
        }
        if (p.contains("sideband_pulse")) {
            if (!p.at("sideband_pulse").is_object())
                throw ConfigError("'sideband_pulse' must be an object");
            cfg.protocol.sideband_pulse = parse_pulse(
                p.at("sideband_pulse"), cfg.protocol.sideband_pulse, "sideband_pulse");
        }
    }

    if (root.contains("scale_mode")) {
        const std::string s = get_string(root, "scale_mode", "n1_coupling");
        if (s == "n1_coupling")
            cfg.scale_mode = SidebandScale::n1_coupling;
        else if (s == "bare_omega0")
            cfg.scale_mode = SidebandScale::bare_omega0;
        else
            throw ConfigError("'scale_mode' must be n1_coupling or bare_omega0");
    }

    if (root.contains("sweep")) {
        const json& s = root.at("sweep");
        if (!s.is_array()) throw ConfigError("'sweep' must be an array of grids");
        cfg.sweep.clear();
        for (const json& g : s) {
            if (!g.is_object()) throw ConfigError("sweep grid must be an object");
            require_keys(g, {"transition", "t_start_s", "t_stop_s", "points"},
                         "sweep grid");
            SweepGrid grid;
            grid.transition = get_transition(g, "transition", grid.transition);
            grid.t_start_s = get_number(g, "t_start_s", grid.t_start_s);
            grid.t_stop_s = get_number(g, "t_stop_s", grid.t_stop_s);
            grid.points = static_cast<int>(get_integer(g, "points", grid.points));
            cfg.sweep.push_back(grid);
        }
    }

    if (root.contains("rabi")) {
        const json& r = root.at("rabi");
        if (!r.is_object()) throw ConfigError("'rabi' must be an object");
        require_keys(r,
                     {"source", "transition", "t_start_s", "t_stop_s", "points",
                      "shots_per_point", "sample_shots", "epsilon"},
                     "rabi");
        if (r.contains("source")) {
            try {
                cfg.rabi.source = rabi_source_from_string(get_string(r, "source", ""));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        cfg.rabi.transition = get_transition(r, "transition", cfg.rabi.transition);
        cfg.rabi.t_start_s = get_number(r, "t_start_s", cfg.rabi.t_start_s);
        cfg.rabi.t_stop_s = get_number(r, "t_stop_s", cfg.rabi.t_stop_s);
        cfg.rabi.points = static_cast<int>(get_integer(r, "points", cfg.rabi.points));
        cfg.rabi.shots_per_point =
            get_integer(r, "shots_per_point", cfg.rabi.shots_per_point);
        cfg.rabi.sample_shots = get_bool(r, "sample_shots", cfg.rabi.sample_shots);
        cfg.rabi.epsilon = get_number(r, "epsilon", cfg.rabi.epsilon);
    }

    if (root.contains("fit")) {
        const json& f = root.at("fit");
        if (!f.is_object()) throw ConfigError("'fit' must be an object");
        require_keys(f,
                     {"input_csv", "guess_p0", "guess_eta", "guess_nbar_tail",
                      "guess_omega0_hz", "omega0_prior_hz", "omega0_prior_sigma_hz"},
                     "fit");
        cfg.fit.input_csv = get_string(f, "input_csv", cfg.fit.input_csv);
        cfg.fit.guess_p0 = get_number(f, "guess_p0", cfg.fit.guess_p0);
        cfg.fit.guess_eta = get_number(f, "guess_eta", cfg.fit.guess_eta);
        cfg.fit.guess_nbar_tail = get_number(f, "guess_nbar_tail", cfg.fit.guess_nbar_tail);
        cfg.fit.guess_omega0_hz = get_number(f, "guess_omega0_hz", cfg.fit.guess_omega0_hz);
        cfg.fit.omega0_prior_hz = get_number(f, "omega0_prior_hz", cfg.fit.omega0_prior_hz);
        cfg.fit.omega0_prior_sigma_hz =
            get_number(f, "omega0_prior_sigma_hz", cfg.fit.omega0_prior_sigma_hz);
    }

    cfg.seed = get_u64(root, "seed", cfg.seed);
    cfg.out_dir = get_string(root, "out_dir", cfg.out_dir);
    cfg.verbosity = static_cast<int>(get_integer(root, "verbosity", cfg.verbosity));
    return cfg;
}

json to_json(const RunConfig& cfg) {
    json sweep = json::array();
    for (const auto& g : cfg.sweep)
        sweep.push_back(json{{"transition", to_string(g.transition)},
                             {"t_start_s", g.t_start_s},
                             {"t_stop_s", g.t_stop_s},
                             {"points", g.points}});
    return json{
        {"mode",
         {{"trap_frequency_hz", cfg.mode.trap_frequency_hz},
          {"lamb_dicke", cfg.mode.lamb_dicke},
          {"omega0_hz", cfg.mode.omega0_hz},
          {"n_max", cfg.mode.n_max}}},
        {"protocol",
         {{"nbar", cfg.protocol.nbar},
          {"cycles", cfg.protocol.cycles_m},
          {"detection_time_s", cfg.protocol.detection_time_s},
          {"detection_fidelity", cfg.protocol.detection_fidelity},
          {"heating_rate_hz", cfg.protocol.heating_rate_hz},
          {"shots", cfg.protocol.shots},
          {"carrier_pulse", pulse_to_json(cfg.protocol.carrier_pulse)},
          {"sideband_pulse", pulse_to_json(cfg.protocol.sideband_pulse)}}},
        {"scale_mode",
         cfg.scale_mode == SidebandScale::n1_coupling ? "n1_coupling" : "bare_omega0"},
        {"sweep", sweep},
        {"rabi",
         {{"source", to_string(cfg.rabi.source)},
          {"transition", to_string(cfg.rabi.transition)},
          {"t_start_s", cfg.rabi.t_start_s},
          {"t_stop_s", cfg.rabi.t_stop_s},
          {"points", cfg.rabi.points},
          {"shots_per_point", cfg.rabi.shots_per_point},
          {"sample_shots", cfg.rabi.sample_shots},
          {"epsilon", cfg.rabi.epsilon}}},
        {"fit",
         {{"input_csv", cfg.fit.input_csv},
          {"guess_p0", cfg.fit.guess_p0},
          {"guess_eta", cfg.fit.guess_eta},
          {"guess_nbar_tail", cfg.fit.guess_nbar_tail},
          {"guess_omega0_hz", cfg.fit.guess_omega0_hz},
          {"omega0_prior_hz", cfg.fit.omega0_prior_hz},
          {"omega0_prior_sigma_hz", cfg.fit.omega0_prior_sigma_hz}}},
        {"seed", cfg.seed},
        {"out_dir", cfg.out_dir},
        {"verbosity", cfg.verbosity}};
}

std::optional<std::string> env_value(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') return std::nullopt;
    return std::string(v);
}

std::uint64_t parse_env_u64(const std::string& text, const char* name) {
    try {
        size_t pos = 0;
        const unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string(name) + " must be a nonnegative integer, got '" +
                          text + "'");
    }
}

long long parse_env_ll(const std::string& text, const char* name) {
    try {
        size_t pos = 0;
        const long long v = std::stoll(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(std::string(name) + " must be an integer, got '" + text + "'");
    }
}

}  // namespace

const char* to_string(RabiSource s) {
    switch (s) {
        case RabiSource::thermal: return "thermal";
        case RabiSource::protocol: return "protocol";
        case RabiSource::analytic: return "analytic";
    }
    return "thermal";
}

RabiSource rabi_source_from_string(const std::string& name) {
    if (name == "thermal") return RabiSource::thermal;
    if (name == "protocol") return RabiSource::protocol;
    if (name == "analytic") return RabiSource::analytic;
    throw std::invalid_argument("unknown rabi source '" + name +
                                "' (expected thermal, protocol or analytic)");
}

void RunConfig::validate() const {
    try {
        mode.validate();
        protocol.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    for (const auto& g : sweep) {
        if (g.points < 1) throw ConfigError("sweep grid needs at least 1 point");
        if (!(g.t_start_s > 0)) throw ConfigError("sweep t_start_s must be positive");
        if (g.points > 1 && !(g.t_stop_s > g.t_start_s))
            throw ConfigError("sweep t_stop_s must exceed t_start_s");
    }
    if (rabi.points < 1) throw ConfigError("rabi.points must be >= 1");
    if (!(rabi.t_start_s > 0)) throw ConfigError("rabi.t_start_s must be positive");
    if (rabi.points > 1 && !(rabi.t_stop_s > rabi.t_start_s))
        throw ConfigError("rabi.t_stop_s must exceed t_start_s");
    if (rabi.shots_per_point < 1) throw ConfigError("rabi.shots_per_point must be >= 1");
    if (!(rabi.epsilon >= 0.0 && rabi.epsilon <= 1.0))
        throw ConfigError("rabi.epsilon must lie in [0, 1]");
    if (!(fit.guess_p0 >= 0.0 && fit.guess_p0 <= 1.0))
        throw ConfigError("fit.guess_p0 must lie in [0, 1]");
    if (!(fit.guess_eta > 0.0 && fit.guess_eta < 1.0))
        throw ConfigError("fit.guess_eta must lie in (0, 1)");
    if (!(fit.guess_nbar_tail >= 0.0)) throw ConfigError("fit.guess_nbar_tail must be >= 0");
    if (!(fit.guess_omega0_hz > 0.0)) throw ConfigError("fit.guess_omega0_hz must be > 0");
    if (fit.omega0_prior_hz > 0.0 && !(fit.omega0_prior_sigma_hz > 0.0))
        throw ConfigError("fit.omega0_prior_sigma_hz must be > 0 when a prior is set");
    if (out_dir.empty()) throw ConfigError("out_dir must not be empty");
    if (verbosity < 0 || verbosity > 2) throw ConfigError("verbosity must be 0, 1 or 2");
}

RunConfig parse_run_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(root);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return parse_run_config(buf.str());
}

std::string canonical_config_json(const RunConfig& cfg) {
    return to_json(cfg).dump(2) + "\n";
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string text = canonical_config_json(cfg);
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string config_hash_hex(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    return buf;
}

RunConfig assemble_run_config(const std::string& command, const CliOverrides& cli) {
    const bool shots_ok = command == "cool" || command == "rabi";
    const bool cycles_ok = command == "cool" || command == "rabi";
    if (cli.shots && !shots_ok)
        throw ConfigError("--shots does not apply to " + command);
    if (cli.cycles && !cycles_ok)
        throw ConfigError("--cycles does not apply to " + command);

    std::optional<std::string> config_path = cli.config_path;
    if (!config_path) config_path = env_value("MBCOOL_CONFIG");

    RunConfig cfg;
    if (config_path) cfg = load_run_config(*config_path);

    // Environment overrides (skipped silently where they do not apply, so a
    // CI-wide export does not break unrelated commands).
    if (const auto v = env_value("MBCOOL_SEED")) cfg.seed = parse_env_u64(*v, "MBCOOL_SEED");
    if (const auto v = env_value("MBCOOL_OUT")) cfg.out_dir = *v;
    if (shots_ok)
        if (const auto v = env_value("MBCOOL_SHOTS")) {
            const long long n = parse_env_ll(*v, "MBCOOL_SHOTS");
            if (command == "cool") cfg.protocol.shots = n;
            if (command == "rabi") cfg.rabi.shots_per_point = n;
        }
    if (cycles_ok)
        if (const auto v = env_value("MBCOOL_CYCLES"))
            cfg.protocol.cycles_m =
                static_cast<int>(parse_env_ll(*v, "MBCOOL_CYCLES"));

    if (cli.seed) cfg.seed = *cli.seed;
    if (cli.out_dir) cfg.out_dir = *cli.out_dir;
    if (cli.shots) {
        if (command == "cool") cfg.protocol.shots = *cli.shots;
        if (command == "rabi") cfg.rabi.shots_per_point = *cli.shots;
    }
    if (cli.cycles) cfg.protocol.cycles_m = *cli.cycles;

    cfg.protocol.rng_seed = cfg.seed;
    cfg.validate();
    return cfg;
}

}  // namespace mbcool
