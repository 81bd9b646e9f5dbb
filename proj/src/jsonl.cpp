#include "hijackdet/jsonl.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <istream>
#include <stdexcept>
#include <system_error>

#include <json.hpp>

#include "hijackdet/version.hpp"

namespace hijackdet {

struct LineReader::Impl {
    gzFile gz = nullptr;
    std::istream* stream = nullptr;
    std::string path;

    std::string buffer;
    size_t pos = 0;
    bool eof = false;

    ~Impl() {
        if (gz) gzclose(gz);
    }

    // Appends up to one chunk of input to buffer. Returns false at EOF.
    bool fill() {
        if (eof) return false;
        char chunk[1 << 16];
        if (gz) {
            int n = gzread(gz, chunk, sizeof(chunk));
            if (n < 0) {
                int errnum = 0;
                const char* msg = gzerror(gz, &errnum);
                throw std::runtime_error("read failure in '" + path + "': " +
                                         (msg ? msg : "unknown gzip error"));
            }
            if (n == 0) {
                eof = true;
                return false;
            }
            buffer.append(chunk, static_cast<size_t>(n));
            return true;
        }
        stream->read(chunk, sizeof(chunk));
        std::streamsize n = stream->gcount();
        if (stream->bad()) throw std::runtime_error("stream read failure");
        if (n == 0) {
            eof = true;
            return false;
        }
        buffer.append(chunk, static_cast<size_t>(n));
        return true;
    }
};

LineReader::LineReader(const std::string& path) : impl_(std::make_unique<Impl>()) {
    impl_->path = path;
    // zlib reads both gzip and plain files transparently (magic-byte sniff).
    impl_->gz = gzopen(path.c_str(), "rb");
    if (!impl_->gz) throw std::runtime_error("cannot open '" + path + "'");
}

LineReader::LineReader(std::istream& in) : impl_(std::make_unique<Impl>()) { impl_->stream = &in; }

LineReader::~LineReader() = default;

bool LineReader::next(std::string& line) {
    auto& im = *impl_;
    while (true) {
        size_t nl = im.buffer.find('\n', im.pos);
        if (nl != std::string::npos) {
            line.assign(im.buffer, im.pos, nl - im.pos);
            im.pos = nl + 1;
            // Compact occasionally so long streams stay bounded.
            if (im.pos > (1 << 20)) {
                im.buffer.erase(0, im.pos);
                im.pos = 0;
            }
            if (!line.empty() && line.back() == '\r') line.pop_back();
            ++line_number_;
            return true;
        }
        try {
            if (!im.fill()) break;
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(std::string(e.what()) + " (near line " +
                                     std::to_string(line_number_ + 1) + ")");
        }
    }
    if (im.pos < im.buffer.size()) {  // final line without newline
        line.assign(im.buffer, im.pos, im.buffer.size() - im.pos);
        im.pos = im.buffer.size();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_number_;
        return true;
    }
    return false;
}

void atomic_write_file(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failure on '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("rename '" + tmp.string() + "' -> '" + path.string() +
                                     "' failed: " + ec.message());
}

std::string meta_json_line(const ArtifactMeta& meta) {
    nlohmann::ordered_json j;
    j["_meta"] = {{"tool_version", meta.tool_version},
                  {"config_hash", meta.config_hash},
                  {"seed", meta.seed}};
    return j.dump();
}

std::string meta_csv_comment(const ArtifactMeta& meta) {
    return "# hijackdet " + meta.tool_version + " config_hash=" + meta.config_hash +
           " seed=" + std::to_string(meta.seed);
}

std::string fnv1a64_hex(std::string_view data) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace hijackdet
