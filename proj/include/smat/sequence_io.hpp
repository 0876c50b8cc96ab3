#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "smat/sequence.hpp"

namespace smat::io {

/// Malformed or unreadable input data.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SeqFormat { text, binary };
SeqFormat parse_format(const std::string& s);
std::string to_string(SeqFormat f);

/// Layout:
///   SMATSEQ 1 <text|binary>
///   sequence <id> <category> <n_frames>
///   frame <idx> <n_points> <x y z w l h yaw> [n_points * (x y z i) in text mode]
/// In binary mode each frame line is followed by n_points * 16 bytes of
/// little-endian float32 (x, y, z, intensity) and a newline.
void write_sequences(std::ostream& os, const std::vector<Sequence>& seqs, SeqFormat format);
std::vector<Sequence> read_sequences(std::istream& is);

void save_sequences(const std::string& path, const std::vector<Sequence>& seqs, SeqFormat format);
std::vector<Sequence> load_sequences(const std::string& path);

/// Source of tracking sequences. Dataset-specific converters implement
/// this; the native format reader is the only one provided.
class SequenceReader {
public:
    virtual ~SequenceReader() = default;
    virtual std::vector<Sequence> read(const std::string& path) = 0;
};

class NativeSequenceReader : public SequenceReader {
public:
    std::vector<Sequence> read(const std::string& path) override { return load_sequences(path); }
};

} // namespace smat::io
