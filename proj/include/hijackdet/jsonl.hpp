#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>

namespace hijackdet {

// Reads a text file line by line. Gzip-compressed files are detected by
// their magic bytes and decompressed transparently; everything else is
// passed through as-is. Lines may be arbitrarily long.
class LineReader {
public:
    explicit LineReader(const std::string& path);
    explicit LineReader(std::istream& in);
    ~LineReader();

    LineReader(const LineReader&) = delete;
    LineReader& operator=(const LineReader&) = delete;

    // Returns false at end of input. Throws std::runtime_error with the
    // line position on I/O or decompression failure.
    bool next(std::string& line);

    uint64_t line_number() const { return line_number_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    uint64_t line_number_ = 0;
};

// Writes content to a temporary file in the target directory and renames it
// into place, so readers never observe a partially written artifact.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

// Provenance header embedded in every artifact.
struct ArtifactMeta {
    std::string tool_version;
    std::string config_hash;
    uint64_t seed = 0;
};

// JSONL artifacts start with {"_meta":{...}}; the corpus parsers skip it.
std::string meta_json_line(const ArtifactMeta& meta);
// CSV artifacts start with a "# ..." comment carrying the same fields.
std::string meta_csv_comment(const ArtifactMeta& meta);

std::string fnv1a64_hex(std::string_view data);

}  // namespace hijackdet
