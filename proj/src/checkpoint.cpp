#include "lspgcn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "lspgcn/data.hpp"

namespace lspgcn {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'P', 'D'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<char*>(b), 4);
}

void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<char*>(b), 8);
}

uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("checkpoint '" + path + "': truncated file");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint64_t read_u64(std::istream& in, const std::string& path) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("checkpoint '" + path + "': truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& spec,
                     const std::vector<NamedParam>& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    const std::string spec_json = spec.to_json();
    write_u32(out, static_cast<uint32_t>(spec_json.size()));
    out.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));
    write_u32(out, static_cast<uint32_t>(params.size()));
    for (const NamedParam& p : params) {
        write_u32(out, static_cast<uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const Shape& sh = p.tensor.shape();
        write_u32(out, static_cast<uint32_t>(sh.size()));
        for (int64_t d : sh) write_u64(out, static_cast<uint64_t>(d));
        static_assert(sizeof(float) == 4);
        const auto v = p.tensor.values();
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * 4));
    }
    if (!out) throw DataError("checkpoint '" + path + "': write failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("checkpoint '" + path + "': bad magic (not a checkpoint file)");
    const uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw DataError("checkpoint '" + path + "': unsupported version " +
                        std::to_string(version) + " (expected " + std::to_string(kVersion) + ")");
    const uint32_t spec_len = read_u32(in, path);
    std::string spec_json(spec_len, '\0');
    in.read(spec_json.data(), spec_len);
    if (!in) throw DataError("checkpoint '" + path + "': truncated spec");
    LoadedCheckpoint ck;
    ck.spec = ModelSpec::from_json(spec_json);
    const uint32_t count = read_u32(in, path);
    for (uint32_t t = 0; t < count; ++t) {
        const uint32_t name_len = read_u32(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const uint32_t rank = read_u32(in, path);
        Shape shape;
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape.push_back(static_cast<int64_t>(read_u64(in, path)));
            numel *= shape.back();
        }
        if (numel < 0 || numel > (int64_t{1} << 32))
            throw DataError("checkpoint '" + path + "': implausible tensor size");
        std::vector<float> vals(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(vals.data()), numel * 4);
        if (!in) throw DataError("checkpoint '" + path + "': truncated tensor '" + name + "'");
        ck.params.emplace(std::move(name), Tensor(std::move(shape), std::move(vals)));
    }
    return ck;
}

Model load_model(const std::string& path) {
    LoadedCheckpoint ck = load_checkpoint(path);
    Model m(ck.spec, /*init_seed=*/0);
    try {
        m.load_values(ck.params);
    } catch (const std::invalid_argument& e) {
        throw DataError("checkpoint '" + path + "': " + e.what());
    }
    return m;
}

}  // namespace lspgcn
