#include "ccdc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ccdc/tensor.hpp"

namespace ccdc {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean for " + key + ": " + v);
}

int parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
    }
}

double parse_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": " + v);
    }
}

std::uint64_t parse_u64(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned integer for " + key + ": " + v);
    }
}

std::array<int, 4> parse_ladder(const std::string& v, const std::string& key) {
    std::array<int, 4> out{};
    std::stringstream ss(v);
    std::string item;
    int i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 4) throw ConfigError("config: " + key + " needs exactly 4 widths: " + v);
        out[static_cast<std::size_t>(i++)] = parse_int(trim(item), key);
    }
    if (i != 4) throw ConfigError("config: " + key + " needs exactly 4 widths: " + v);
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string RunConfig::method_tag() const {
    if (use_visibility && use_warping_loss) return "full";
    if (!use_visibility && use_warping_loss) return "no_vis";
    if (use_visibility && !use_warping_loss) return "no_warp";
    return "no_vis_no_warp";
}

void RunConfig::validate() const {
    if (steps < 0) throw ConfigError("config: steps must be >= 0");
    if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
    if (!(lr > 0)) throw ConfigError("config: lr must be positive");
    if (lambda_warp < 0) throw ConfigError("config: lambda_warp must be >= 0");
    if (!(flow_width_mult > 0)) throw ConfigError("config: flow_width_mult must be positive");
    for (int c : encoder_ladder) {
        if (c < 1) throw ConfigError("config: encoder_ladder widths must be positive");
    }
    if (scale != 1 && scale != 2 && scale != 4 && scale != 8) {
        throw ConfigError("config: scale must be one of 1,2,4,8");
    }
    if (frame_gap < 0) throw ConfigError("config: frame_gap must be >= 0");
    if (toy_n < 1) throw ConfigError("config: toy_n must be >= 1");
    if (toy_size < 64 || toy_size % 64 != 0) {
        throw ConfigError("config: toy_size must be a positive multiple of 64");
    }
    if (checkpoint_every < 1) throw ConfigError("config: checkpoint_every must be >= 1");
}

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_u64(value, key);
    else if (key == "steps") cfg.steps = parse_int(value, key);
    else if (key == "batch_size") cfg.batch_size = parse_int(value, key);
    else if (key == "lr") cfg.lr = parse_double(value, key);
    else if (key == "adam_beta1") cfg.adam_beta1 = parse_double(value, key);
    else if (key == "adam_beta2") cfg.adam_beta2 = parse_double(value, key);
    else if (key == "adam_eps") cfg.adam_eps = parse_double(value, key);
    else if (key == "lambda_warp") cfg.lambda_warp = parse_double(value, key);
    else if (key == "use_visibility") cfg.use_visibility = parse_bool(value, key);
    else if (key == "use_warping_loss") cfg.use_warping_loss = parse_bool(value, key);
    else if (key == "use_target_in_head") cfg.use_target_in_head = parse_bool(value, key);
    else if (key == "encoder_ladder") cfg.encoder_ladder = parse_ladder(value, key);
    else if (key == "flow_width_mult") cfg.flow_width_mult = parse_double(value, key);
    else if (key == "scale") cfg.scale = parse_int(value, key);
    else if (key == "frame_gap") cfg.frame_gap = parse_int(value, key);
    else if (key == "resample_frame_gap") cfg.resample_frame_gap = parse_bool(value, key);
    else if (key == "manifest") cfg.manifest = value;
    else if (key == "toy_n") cfg.toy_n = parse_int(value, key);
    else if (key == "toy_size") cfg.toy_size = parse_int(value, key);
    else if (key == "checkpoint_dir") cfg.checkpoint_dir = value;
    else if (key == "checkpoint_every") cfg.checkpoint_every = parse_int(value, key);
    else if (key == "loss_csv") cfg.loss_csv = value;
    else throw ConfigError("config: unknown key: " + key);
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value: " + t);
        }
        apply_config_kv(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "seed=" << cfg.seed << "\n";
    out << "steps=" << cfg.steps << "\n";
    out << "batch_size=" << cfg.batch_size << "\n";
    out << "lr=" << format_double(cfg.lr) << "\n";
    out << "adam_beta1=" << format_double(cfg.adam_beta1) << "\n";
    out << "adam_beta2=" << format_double(cfg.adam_beta2) << "\n";
    out << "adam_eps=" << format_double(cfg.adam_eps) << "\n";
    out << "lambda_warp=" << format_double(cfg.lambda_warp) << "\n";
    out << "use_visibility=" << (cfg.use_visibility ? "true" : "false") << "\n";
    out << "use_warping_loss=" << (cfg.use_warping_loss ? "true" : "false") << "\n";
    out << "use_target_in_head=" << (cfg.use_target_in_head ? "true" : "false") << "\n";
    out << "encoder_ladder=" << cfg.encoder_ladder[0] << ',' << cfg.encoder_ladder[1] << ','
        << cfg.encoder_ladder[2] << ',' << cfg.encoder_ladder[3] << "\n";
    out << "flow_width_mult=" << format_double(cfg.flow_width_mult) << "\n";
    out << "scale=" << cfg.scale << "\n";
    out << "frame_gap=" << cfg.frame_gap << "\n";
    out << "resample_frame_gap=" << (cfg.resample_frame_gap ? "true" : "false") << "\n";
    out << "manifest=" << cfg.manifest << "\n";
    out << "toy_n=" << cfg.toy_n << "\n";
    out << "toy_size=" << cfg.toy_size << "\n";
    out << "checkpoint_dir=" << cfg.checkpoint_dir << "\n";
    out << "checkpoint_every=" << cfg.checkpoint_every << "\n";
    out << "loss_csv=" << cfg.loss_csv << "\n";
    return out.str();
}

void save_config(const std::string& path, const RunConfig& cfg) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::trunc);
        if (!f) throw IoError("config: cannot open " + tmp);
        f << serialize_config(cfg);
        if (!f) throw IoError("config: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("config: cannot rename " + tmp + " to " + path);
    }
}

}  // namespace ccdc
