#include "gyre/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "gyre/hash.hpp"

namespace gyre {

namespace {

constexpr char kMagic[8] = {'G', 'Y', 'R', 'E', 'C', 'K', 'P', '1'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kFlagAdam = 1u << 0;
constexpr uint32_t kFlagF32 = 1u << 1;

using Err = CheckpointError;
using Kind = CheckpointError::Kind;

struct Writer {
    std::vector<uint8_t>& out;
    void bytes(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void u8(uint8_t v) { out.push_back(v); }
    void u16(uint16_t v) { for (int i = 0; i < 2; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i))); }
    void u32(uint32_t v) { for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i))); }
    void u64(uint64_t v) { for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i))); }
    void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
    void f32(float v) { u32(std::bit_cast<uint32_t>(v)); }
};

struct Reader {
    std::span<const uint8_t> in;
    size_t pos = 0;
    void need(size_t n) const {
        if (pos + n > in.size()) throw Err(Kind::Truncated, "checkpoint: truncated");
    }
    void bytes(void* p, size_t n) {
        need(n);
        std::memcpy(p, in.data() + pos, n);
        pos += n;
    }
    uint8_t u8() { need(1); return in[pos++]; }
    uint16_t u16() {
        need(2);
        uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<uint16_t>(in[pos++]) << (8 * i);
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(in[pos++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(in[pos++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    float f32() { return std::bit_cast<float>(u32()); }
};

nlohmann::ordered_json arch_json(const NetArch& a) {
    return {{"in_ch", a.in_ch}, {"in_h", a.in_h}, {"in_w", a.in_w}, {"c1", a.c1},
            {"k1", a.k1},       {"c2", a.c2},     {"k2", a.k2},     {"c3", a.c3},
            {"k3", a.k3},       {"dense", a.dense}, {"actions", a.actions}};
}

NetArch arch_from_json(const nlohmann::json& j) {
    NetArch a;
    a.in_ch = j.at("in_ch").get<int>();
    a.in_h = j.at("in_h").get<int>();
    a.in_w = j.at("in_w").get<int>();
    a.c1 = j.at("c1").get<int>();
    a.k1 = j.at("k1").get<int>();
    a.c2 = j.at("c2").get<int>();
    a.k2 = j.at("k2").get<int>();
    a.c3 = j.at("c3").get<int>();
    a.k3 = j.at("k3").get<int>();
    a.dense = j.at("dense").get<int>();
    a.actions = j.at("actions").get<int>();
    return a;
}

}  // namespace

std::vector<uint8_t> save_checkpoint(const ParamSet& params, const AdamState* adam,
                                     const CheckpointMeta& meta, bool store_f32) {
    std::vector<uint8_t> out;
    Writer w{out};

    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (auto& [name, t] : params.tensors()) entries.emplace_back(name, t);
    if (adam) {
        for (auto& [name, t] : adam->m.tensors())
            entries.emplace_back(std::string("adam.m.") + name, t);
        for (auto& [name, t] : adam->v.tensors())
            entries.emplace_back(std::string("adam.v.") + name, t);
    }

    nlohmann::ordered_json meta_j;
    meta_j["env_id"] = meta.env_id;
    meta_j["env_steps"] = meta.env_steps;
    meta_j["updates"] = meta.updates;
    meta_j["best_episode_reward"] = meta.best_episode_reward;
    meta_j["seed"] = meta.seed;
    meta_j["initial_weights_id"] = meta.initial_weights_id;
    meta_j["budget_truncated"] = meta.budget_truncated;
    meta_j["arch"] = arch_json(params.arch);
    if (adam) {
        meta_j["adam"] = {{"lr", adam->lr},   {"beta1", adam->beta1}, {"beta2", adam->beta2},
                          {"eps", adam->eps}, {"step", adam->step}};
    }
    const std::string meta_s = meta_j.dump();

    int64_t total_elems = 0;
    for (auto& [name, t] : entries) total_elems += t->count();
    const size_t elem_size = store_f32 ? 4 : 8;

    w.bytes(kMagic, 8);
    w.u32(kVersion);
    w.u32((adam ? kFlagAdam : 0) | (store_f32 ? kFlagF32 : 0));
    w.u32(static_cast<uint32_t>(entries.size()));
    w.u64(static_cast<uint64_t>(total_elems) * elem_size);
    w.u32(static_cast<uint32_t>(meta_s.size()));
    w.bytes(meta_s.data(), meta_s.size());

    uint64_t offset = 0;
    for (auto& [name, t] : entries) {
        w.u16(static_cast<uint16_t>(name.size()));
        w.bytes(name.data(), name.size());
        w.u8(static_cast<uint8_t>(t->shape.size()));
        for (int d : t->shape) w.i32(d);
        w.u64(offset);
        offset += static_cast<uint64_t>(t->count());
    }
    for (auto& [name, t] : entries) {
        if (store_f32)
            for (double v : t->data) w.f32(static_cast<float>(v));
        else
            for (double v : t->data) w.f64(v);
    }
    return out;
}

LoadedCheckpoint load_checkpoint(std::span<const uint8_t> bytes) {
    Reader r{bytes};
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw Err(Kind::BadMagic, "checkpoint: bad magic");
    const uint32_t version = r.u32();
    if (version != kVersion)
        throw Err(Kind::VersionMismatch,
                  "checkpoint: version " + std::to_string(version) + " unsupported");
    const uint32_t flags = r.u32();
    const bool has_adam = flags & kFlagAdam;
    const bool is_f32 = flags & kFlagF32;
    const uint32_t tensor_count = r.u32();
    const uint64_t data_bytes = r.u64();
    const uint32_t meta_len = r.u32();
    r.need(meta_len);
    std::string meta_s(reinterpret_cast<const char*>(bytes.data() + r.pos), meta_len);
    r.pos += meta_len;

    nlohmann::json meta_j;
    try {
        meta_j = nlohmann::json::parse(meta_s);
    } catch (const nlohmann::json::exception&) {
        throw Err(Kind::Truncated, "checkpoint: corrupt metadata block");
    }

    NetArch arch;
    try {
        arch = arch_from_json(meta_j.at("arch"));
    } catch (const nlohmann::json::exception&) {
        throw Err(Kind::ShapeMismatch, "checkpoint: missing architecture block");
    }

    LoadedCheckpoint lc;
    lc.params = ParamSet::make(arch);
    if (has_adam) {
        lc.adam = AdamState::make(arch);
        if (meta_j.contains("adam")) {
            const auto& aj = meta_j["adam"];
            lc.adam->lr = aj.value("lr", 1e-3);
            lc.adam->beta1 = aj.value("beta1", 0.9);
            lc.adam->beta2 = aj.value("beta2", 0.999);
            lc.adam->eps = aj.value("eps", 1e-8);
            lc.adam->step = aj.value("step", int64_t{0});
        }
    }
    lc.meta.env_id = meta_j.value("env_id", std::string{});
    lc.meta.env_steps = meta_j.value("env_steps", int64_t{0});
    lc.meta.updates = meta_j.value("updates", int64_t{0});
    lc.meta.best_episode_reward = meta_j.value("best_episode_reward", 0.0);
    lc.meta.seed = meta_j.value("seed", uint64_t{0});
    lc.meta.initial_weights_id = meta_j.value("initial_weights_id", std::string{});
    lc.meta.budget_truncated = meta_j.value("budget_truncated", false);

    std::vector<std::pair<std::string, Tensor*>> expected;
    for (auto& [name, t] : lc.params.tensors()) expected.emplace_back(name, t);
    if (lc.adam) {
        for (auto& [name, t] : lc.adam->m.tensors())
            expected.emplace_back(std::string("adam.m.") + name, t);
        for (auto& [name, t] : lc.adam->v.tensors())
            expected.emplace_back(std::string("adam.v.") + name, t);
    }
    if (tensor_count != expected.size())
        throw Err(Kind::ShapeMismatch, "checkpoint: unexpected tensor count");

    struct Row { Tensor* t; uint64_t offset; };
    std::vector<Row> rows;
    int64_t total_elems = 0;
    for (uint32_t i = 0; i < tensor_count; ++i) {
        const uint16_t name_len = r.u16();
        r.need(name_len);
        std::string name(reinterpret_cast<const char*>(bytes.data() + r.pos), name_len);
        r.pos += name_len;
        const uint8_t ndim = r.u8();
        std::vector<int> dims(ndim);
        for (uint8_t d = 0; d < ndim; ++d) dims[d] = static_cast<int32_t>(r.u32());
        const uint64_t offset = r.u64();

        if (name != expected[i].first)
            throw Err(Kind::ShapeMismatch, "checkpoint: tensor '" + name + "' out of order");
        Tensor* t = expected[i].second;
        if (dims != t->shape)
            throw Err(Kind::ShapeMismatch, "checkpoint: shape mismatch for '" + name + "'");
        rows.push_back(Row{t, offset});
        total_elems += t->count();
    }
    const size_t elem_size = is_f32 ? 4 : 8;
    if (data_bytes != static_cast<uint64_t>(total_elems) * elem_size)
        throw Err(Kind::Truncated, "checkpoint: data length field disagrees with table");
    r.need(data_bytes);

    for (const Row& row : rows) {
        const size_t start = r.pos + static_cast<size_t>(row.offset) * elem_size;
        if (start + static_cast<size_t>(row.t->count()) * elem_size > bytes.size())
            throw Err(Kind::Truncated, "checkpoint: tensor data out of range");
        Reader tr{bytes, start};
        if (is_f32)
            for (double& v : row.t->data) v = static_cast<double>(tr.f32());
        else
            for (double& v : row.t->data) v = tr.f64();
    }
    return lc;
}

LoadedCheckpoint load_checkpoint_expect(std::span<const uint8_t> bytes, const NetArch& expected) {
    LoadedCheckpoint lc = load_checkpoint(bytes);
    if (!(lc.params.arch == expected))
        throw Err(Kind::ShapeMismatch, "checkpoint: architecture does not match expectation");
    return lc;
}

uint64_t checkpoint_hash(std::span<const uint8_t> bytes) {
    return fnv1a64(bytes.data(), bytes.size());
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for write: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write: " + path);
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw std::runtime_error("cannot open: " + path);
    const std::streamsize n = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> bytes(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(bytes.data()), n);
    if (in.gcount() != n) throw std::runtime_error("short read: " + path);
    return bytes;
}

std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

}  // namespace gyre
