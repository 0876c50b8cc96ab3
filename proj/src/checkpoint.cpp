#include "smat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <cstdio>
#include <fstream>

#include "smat/sequence_io.hpp"

namespace smat::checkpoint {

namespace {

constexpr char kMagic[8] = {'S', 'M', 'A', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

template <class T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& os, const std::string& s) {
    put<std::uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_params(std::ostream& os, const ag::ParameterSet& ps) {
    put<std::uint64_t>(os, ps.size());
    for (const auto& [name, e] : ps.entries()) {
        put_string(os, name);
        put<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
        for (int d : e.value.shape()) put<std::int32_t>(os, d);
        os.write(reinterpret_cast<const char*>(e.value.data()), static_cast<std::streamsize>(e.value.size() * sizeof(double)));
    }
}

class Reader {
public:
    Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}

    template <class T>
    T get() {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!is_) fail("truncated");
        return v;
    }

    std::string get_string() {
        const std::uint64_t n = get<std::uint64_t>();
        if (n > (1ULL << 32)) fail("implausible string length");
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        if (!is_) fail("truncated");
        return s;
    }

    ag::ParameterSet get_params() {
        ag::ParameterSet ps;
        const std::uint64_t count = get<std::uint64_t>();
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::string name = get_string();
            const std::uint32_t rank = get<std::uint32_t>();
            if (rank > 8) fail("implausible tensor rank");
            std::vector<int> shape(rank);
            for (int& d : shape) {
                d = get<std::int32_t>();
                if (d < 0) fail("negative dimension");
            }
            Tensor t(shape, 0.0);
            is_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
            if (!is_) fail("truncated tensor " + name);
            ps.add(name, std::move(t));
        }
        return ps;
    }

    [[noreturn]] void fail(const std::string& why) { throw io::DataError("checkpoint " + path_ + ": " + why); }

private:
    std::istream& is_;
    std::string path_;
};

} // namespace

void save(const std::string& path, const Checkpoint& ckpt) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw io::DataError("cannot write checkpoint " + path);
        os.write(kMagic, sizeof(kMagic));
        put(os, kVersion);
        put_string(os, ckpt.config_text);
        put(os, ckpt.config_hash);
        put(os, ckpt.model_hash);
        put<std::int64_t>(os, ckpt.step);
        put_params(os, ckpt.params);
        put_params(os, ckpt.adam_m);
        put_params(os, ckpt.adam_v);
        if (!os) throw io::DataError("failed writing checkpoint " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw io::DataError("cannot move checkpoint into " + path);
}

Checkpoint load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io::DataError("cannot read checkpoint " + path);
    Reader r(is, path);
    char magic[sizeof(kMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not a checkpoint file");
    if (r.get<std::uint32_t>() != kVersion) r.fail("unsupported version");
    Checkpoint c;
    c.config_text = r.get_string();
    c.config_hash = r.get<std::uint64_t>();
    c.model_hash = r.get<std::uint64_t>();
    c.step = r.get<std::int64_t>();
    c.params = r.get_params();
    c.adam_m = r.get_params();
    c.adam_v = r.get_params();
    return c;
}

} // namespace smat::checkpoint
