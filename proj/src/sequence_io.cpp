#include "smat/sequence_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace smat::io {

namespace {

constexpr const char* kMagic = "SMATSEQ";
constexpr int kVersion = 1;

static_assert(std::endian::native == std::endian::little, "binary sequence files assume a little-endian host");

void check_token(const std::string& s, const char* what) {
    if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos)
        throw DataError(std::string("sequence ") + what + " must be a non-empty single word: '" + s + "'");
}

std::string next_line(std::istream& is, const char* expecting) {
    std::string line;
    if (!std::getline(is, line)) throw DataError(std::string("unexpected end of sequence file, expecting ") + expecting);
    return line;
}

} // namespace

SeqFormat parse_format(const std::string& s) {
    if (s == "text") return SeqFormat::text;
    if (s == "binary") return SeqFormat::binary;
    throw std::invalid_argument("unknown sequence format: " + s);
}

std::string to_string(SeqFormat f) { return f == SeqFormat::binary ? "binary" : "text"; }

void write_sequences(std::ostream& os, const std::vector<Sequence>& seqs, SeqFormat format) {
    os << kMagic << ' ' << kVersion << ' ' << to_string(format) << '\n';
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const Sequence& seq : seqs) {
        check_token(seq.id, "id");
        check_token(seq.category, "category");
        os << "sequence " << seq.id << ' ' << seq.category << ' ' << seq.frames.size() << '\n';
        for (std::size_t f = 0; f < seq.frames.size(); ++f) {
            const Frame& fr = seq.frames[f];
            os << "frame " << f << ' ' << fr.cloud.size();
            for (double v : fr.gt.to_array()) os << ' ' << v;
            if (format == SeqFormat::text) {
                for (const Point& p : fr.cloud.points) os << ' ' << p.x << ' ' << p.y << ' ' << p.z << ' ' << p.intensity;
                os << '\n';
            } else {
                os << '\n';
                std::vector<float> buf;
                buf.reserve(fr.cloud.size() * 4);
                for (const Point& p : fr.cloud.points) {
                    buf.push_back(static_cast<float>(p.x));
                    buf.push_back(static_cast<float>(p.y));
                    buf.push_back(static_cast<float>(p.z));
                    buf.push_back(static_cast<float>(p.intensity));
                }
                os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
                os << '\n';
            }
        }
    }
    if (!os) throw DataError("failed writing sequence data");
}

std::vector<Sequence> read_sequences(std::istream& is) {
    std::istringstream header(next_line(is, "header"));
    std::string magic, mode;
    int version = 0;
    header >> magic >> version >> mode;
    if (magic != kMagic) throw DataError("not a sequence file (missing " + std::string(kMagic) + " header)");
    if (version != kVersion) throw DataError("unsupported sequence file version " + std::to_string(version));
    SeqFormat format;
    try {
        format = parse_format(mode);
    } catch (const std::invalid_argument& e) {
        throw DataError(e.what());
    }

    std::vector<Sequence> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        long long n_frames = -1;
        Sequence seq;
        ls >> tag >> seq.id >> seq.category >> n_frames;
        if (tag != "sequence" || !ls || n_frames < 0) throw DataError("malformed sequence record: " + line);
        for (long long f = 0; f < n_frames; ++f) {
            std::istringstream fs(next_line(is, "frame record"));
            long long idx = -1, n = -1;
            std::array<double, 7> box{};
            fs >> tag >> idx >> n;
            for (double& v : box) fs >> v;
            if (tag != "frame" || !fs || idx != f || n < 0)
                throw DataError("malformed frame " + std::to_string(f) + " in sequence " + seq.id);
            Frame frame;
            try {
                frame.gt = Box3D::from_array(box);
            } catch (const std::invalid_argument& e) {
                throw DataError("invalid box in sequence " + seq.id + ": " + e.what());
            }
            frame.cloud.points.resize(static_cast<std::size_t>(n));
            if (format == SeqFormat::text) {
                for (Point& p : frame.cloud.points) fs >> p.x >> p.y >> p.z >> p.intensity;
                if (!fs) throw DataError("truncated points in sequence " + seq.id + " frame " + std::to_string(f));
            } else {
                std::vector<float> buf(static_cast<std::size_t>(n) * 4);
                is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
                if (!is || is.get() != '\n')
                    throw DataError("truncated binary points in sequence " + seq.id + " frame " + std::to_string(f));
                for (std::size_t i = 0; i < frame.cloud.points.size(); ++i)
                    frame.cloud.points[i] = {buf[4 * i], buf[4 * i + 1], buf[4 * i + 2], buf[4 * i + 3]};
            }
            seq.frames.push_back(std::move(frame));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

void save_sequences(const std::string& path, const std::vector<Sequence>& seqs, SeqFormat format) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    write_sequences(os, seqs, format);
}

std::vector<Sequence> load_sequences(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read " + path);
    return read_sequences(is);
}

} // namespace smat::io
