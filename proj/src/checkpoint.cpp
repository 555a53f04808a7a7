#include "ccdc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_map>

namespace ccdc {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + static_cast<std::size_t>(i)]);
        pos_ += 4;
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf_[pos_ + static_cast<std::size_t>(i)]);
        pos_ += 8;
        return v;
    }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void floats(float* dst, std::size_t n) {
        need(n * 4);
        std::memcpy(dst, buf_.data() + pos_, n * 4);
        pos_ += n * 4;
    }

    bool eof() const { return pos_ >= buf_.size(); }

private:
    void need(std::size_t n) {
        if (pos_ + n > buf_.size()) throw IoError("checkpoint: truncated file " + path_);
    }
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

void append_tensor(std::string& buf, const std::string& name, const TensorF& t) {
    put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape) put_u32(buf, static_cast<std::uint32_t>(d));
    const std::size_t n = t.numel();
    const std::size_t off = buf.size();
    buf.resize(off + n * 4);
    std::memcpy(buf.data() + off, t.data.data(), n * 4);
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, std::uint64_t step,
                     const std::vector<nn::ParamRef<float>>& params, const AdamState* adam) {
    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u64(buf, step);
    const std::string cfg_text = serialize_config(cfg);
    put_u32(buf, static_cast<std::uint32_t>(cfg_text.size()));
    buf.append(cfg_text);
    put_u64(buf, adam ? adam->t : 0);
    put_u32(buf, adam ? 1u : 0u);

    std::uint32_t n_tensors = static_cast<std::uint32_t>(params.size());
    if (adam) n_tensors += 2 * static_cast<std::uint32_t>(params.size());
    put_u32(buf, n_tensors);
    for (const auto& p : params) append_tensor(buf, p.name, *p.value);
    if (adam) {
        if (adam->m.size() != params.size() || adam->v.size() != params.size()) {
            throw ConfigError("checkpoint: optimizer state does not match parameter list");
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            append_tensor(buf, "adam.m." + params[i].name, adam->m[i]);
            append_tensor(buf, "adam.v." + params[i].name, adam->v[i]);
        }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("checkpoint: cannot open " + tmp);
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw IoError("checkpoint: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("checkpoint: cannot rename " + tmp + " to " + path);
    }
}

namespace {

struct Parsed {
    RunConfig config;
    std::uint64_t step = 0;
    std::uint64_t adam_t = 0;
    bool has_adam = false;
    std::unordered_map<std::string, TensorF> tensors;
};

Parsed parse_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw IoError("checkpoint: " + path + " is not a checkpoint");
    }
    Reader r(buf, path);
    r.bytes(4);
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw IoError("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
    }
    Parsed out;
    out.step = r.u64();
    const std::uint32_t cfg_len = r.u32();
    out.config = parse_config_text(r.bytes(cfg_len));
    out.adam_t = r.u64();
    out.has_adam = r.u32() != 0;
    const std::uint32_t n_tensors = r.u32();
    for (std::uint32_t i = 0; i < n_tensors; ++i) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        if (rank < 1 || rank > 4) throw IoError("checkpoint: bad tensor rank in " + path);
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(static_cast<int>(r.u32()));
        TensorF t(shape);
        r.floats(t.data.data(), t.numel());
        out.tensors.emplace(std::move(name), std::move(t));
    }
    return out;
}

void check_compatible(const RunConfig& a, const RunConfig& b, const std::string& path) {
    const bool ok = a.use_visibility == b.use_visibility && a.use_warping_loss == b.use_warping_loss &&
                    a.use_target_in_head == b.use_target_in_head && a.encoder_ladder == b.encoder_ladder &&
                    a.flow_width_mult == b.flow_width_mult;
    if (!ok) {
        throw ConfigError("checkpoint: " + path +
                          " was trained under a different ablation/architecture configuration");
    }
}

}  // namespace

CheckpointInfo load_checkpoint(const std::string& path, const RunConfig& expected,
                               const std::vector<nn::ParamRef<float>>& params, AdamState* adam) {
    Parsed parsed = parse_file(path);
    check_compatible(parsed.config, expected, path);

    for (const auto& p : params) {
        auto it = parsed.tensors.find(p.name);
        if (it == parsed.tensors.end()) {
            throw IoError("checkpoint: " + path + " is missing tensor " + p.name);
        }
        if (!it->second.same_shape(*p.value)) {
            throw IoError("checkpoint: tensor " + p.name + " has shape " + it->second.shape_str() +
                          ", expected " + p.value->shape_str());
        }
        *p.value = it->second;
    }
    if (adam) {
        adam->init(params);
        if (parsed.has_adam) {
            adam->t = parsed.adam_t;
            for (std::size_t i = 0; i < params.size(); ++i) {
                auto im = parsed.tensors.find("adam.m." + params[i].name);
                auto iv = parsed.tensors.find("adam.v." + params[i].name);
                if (im == parsed.tensors.end() || iv == parsed.tensors.end()) {
                    throw IoError("checkpoint: incomplete optimizer state in " + path);
                }
                adam->m[i] = im->second;
                adam->v[i] = iv->second;
            }
        }
    }
    CheckpointInfo info;
    info.config = parsed.config;
    info.step = parsed.step;
    info.has_adam = parsed.has_adam;
    return info;
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    Parsed parsed = parse_file(path);
    CheckpointInfo info;
    info.config = parsed.config;
    info.step = parsed.step;
    info.has_adam = parsed.has_adam;
    return info;
}

}  // namespace ccdc
