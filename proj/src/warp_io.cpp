#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "ccdc/warp.hpp"

namespace ccdc {

namespace {

constexpr char kMagic[4] = {'C', 'C', 'F', 'L'};

void put_u16(std::vector<unsigned char>& buf, std::uint16_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xff));
    buf.push_back(static_cast<unsigned char>(v >> 8));
}

void put_f32(std::vector<unsigned char>& buf, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>((bits >> (8 * i)) & 0xff));
}

}  // namespace

void save_flow(const std::string& path, const TensorF& flow) {
    check_flow(flow, "save_flow");
    const int h = flow.height(), w = flow.width();
    if (h > 0xffff || w > 0xffff) throw IoError("save_flow: dimensions exceed u16 range");

    std::vector<unsigned char> buf;
    buf.reserve(8 + flow.numel() * 4);
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u16(buf, static_cast<std::uint16_t>(h));
    put_u16(buf, static_cast<std::uint16_t>(w));
    for (float v : flow.data) put_f32(buf, v);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("save_flow: cannot open " + tmp);
        f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!f) throw IoError("save_flow: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw IoError("save_flow: cannot rename " + tmp + " to " + path);
    }
}

TensorF load_flow(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("load_flow: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0) {
        throw IoError("load_flow: " + path + " is not a flow dump");
    }
    const int h = buf[4] | (buf[5] << 8);
    const int w = buf[6] | (buf[7] << 8);
    const std::size_t need = 8 + static_cast<std::size_t>(2) * h * w * 4;
    if (h < 1 || w < 1 || buf.size() != need) {
        throw IoError("load_flow: truncated or oversized payload in " + path);
    }
    TensorF flow({2, h, w});
    for (std::size_t i = 0; i < flow.data.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 3; b >= 0; --b) bits = (bits << 8) | buf[8 + i * 4 + static_cast<std::size_t>(b)];
        float v;
        std::memcpy(&v, &bits, 4);
        flow.data[i] = v;
    }
    return flow;
}

}  // namespace ccdc
