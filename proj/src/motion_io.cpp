#include "m3t/motion_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "m3t/errors.hpp"

namespace m3t {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

constexpr std::uint32_t kVersion = 1;

std::uint32_t modality_code(Modality m) { return static_cast<std::uint32_t>(m); }

template <typename T>
void put(std::string& out, T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}
    template <typename T>
    T get(const char* what) {
        if (pos_ + sizeof(T) > bytes_.size()) throw ParseError(std::string("truncated file while reading ") + what);
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string magic() {
        if (pos_ + 4 > bytes_.size()) throw ParseError("truncated file: missing magic");
        std::string m = bytes_.substr(pos_, 4);
        pos_ += 4;
        return m;
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    const std::string& bytes_;
    std::size_t pos_ = 0;
};

void append_motion(std::string& out, const MotionSequence& m) {
    m.validate();
    out += "M3TK";
    put(out, kVersion);
    put(out, modality_code(m.modality));
    put(out, m.fps);
    put<std::uint64_t>(out, m.frames);
    put<std::uint64_t>(out, m.dim);
    for (Real v : m.data) put(out, v);
}

MotionSequence take_motion(Reader& r) {
    if (r.magic() != "M3TK") throw ParseError("not an M3TK motion record");
    if (r.get<std::uint32_t>("version") != kVersion) throw ParseError("unsupported motion file version");
    auto code = r.get<std::uint32_t>("modality");
    if (code >= kModalities.size()) throw ParseError("unknown modality code " + std::to_string(code));
    MotionSequence m;
    m.modality = kModalities[code];
    m.fps = r.get<Real>("fps");
    m.frames = r.get<std::uint64_t>("frame count");
    m.dim = r.get<std::uint64_t>("dimension");
    if (m.dim != modality_dim(m.modality))
        throw ParseError("dimension " + std::to_string(m.dim) + " does not match modality " +
                         std::string(modality_name(m.modality)));
    m.data.resize(m.frames * m.dim);
    for (auto& v : m.data) v = r.get<Real>("frame data");
    try {
        m.validate();
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
    return m;
}

}  // namespace

void MotionSequence::validate() const {
    if (dim != modality_dim(modality))
        throw DimensionError(std::string(modality_name(modality)) + " motion must have dimension " +
                             std::to_string(modality_dim(modality)) + ", got " + std::to_string(dim));
    if (data.size() != frames * dim) throw DimensionError("motion data size does not match frames x dim");
    if (!(fps > 0) || !std::isfinite(fps)) throw DataError("motion fps must be positive");
    for (Real v : data)
        if (!std::isfinite(v)) throw DataError("motion holds non-finite values");
}

std::string motion_to_bytes(const MotionSequence& m) {
    std::string out;
    append_motion(out, m);
    return out;
}

MotionSequence motion_from_bytes(const std::string& bytes) {
    Reader r(bytes);
    auto m = take_motion(r);
    if (!r.done()) throw ParseError("trailing bytes after motion record");
    return m;
}

std::string motion_to_text(const MotionSequence& m) {
    m.validate();
    std::ostringstream out;
    out << "m3t-motion v1 modality=" << modality_name(m.modality) << " fps=" << std::setprecision(17) << m.fps
        << " frames=" << m.frames << " dim=" << m.dim << '\n';
    for (std::size_t t = 0; t < m.frames; ++t) {
        for (std::size_t i = 0; i < m.dim; ++i) out << (i ? " " : "") << m.data[t * m.dim + i];
        out << '\n';
    }
    return out.str();
}

MotionSequence motion_from_text(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError("empty motion file", 1);
    MotionSequence m;
    {
        std::istringstream h(line);
        std::string magic, version;
        h >> magic >> version;
        if (magic != "m3t-motion" || version != "v1") throw ParseError("expected 'm3t-motion v1' header", line_no);
        bool have_mod = false, have_frames = false, have_dim = false;
        for (std::string kv; h >> kv;) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) throw ParseError("bad header field '" + kv + "'", line_no);
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            try {
                if (key == "modality") {
                    m.modality = parse_modality(val);
                    have_mod = true;
                } else if (key == "fps") {
                    m.fps = std::stod(val);
                } else if (key == "frames") {
                    m.frames = std::stoul(val);
                    have_frames = true;
                } else if (key == "dim") {
                    m.dim = std::stoul(val);
                    have_dim = true;
                } else {
                    throw ParseError("unknown header field '" + key + "'", line_no);
                }
            } catch (const ParseError&) {
                throw;
            } catch (const std::exception&) {
                throw ParseError("bad value in header field '" + kv + "'", line_no);
            }
        }
        if (!have_mod || !have_frames || !have_dim) throw ParseError("header needs modality, frames and dim", line_no);
    }
    m.data.reserve(m.frames * m.dim);
    for (std::size_t t = 0; t < m.frames; ++t) {
        if (!next_line()) throw ParseError("file ends after " + std::to_string(t) + " frames", line_no + 1);
        std::istringstream row(line);
        std::size_t count = 0;
        for (Real v; row >> v; ++count) m.data.push_back(v);
        if (!row.eof() || count != m.dim)
            throw ParseError("expected " + std::to_string(m.dim) + " numbers", line_no);
    }
    if (next_line()) throw ParseError("unexpected trailing content", line_no);
    try {
        m.validate();
    } catch (const Error& e) {
        throw ParseError(e.what());
    }
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + path + "'");
    out << contents;
    if (!out) throw UsageError("failed writing '" + path + "'");
}

MotionSequence read_motion(const std::string& path) {
    auto bytes = read_file(path);
    if (bytes.rfind("M3TK", 0) == 0) return motion_from_bytes(bytes);
    return motion_from_text(bytes);
}

void write_motion(const MotionSequence& m, const std::string& path, bool text) {
    write_file(path, text ? motion_to_text(m) : motion_to_bytes(m));
}

std::string dataset_to_bytes(const std::vector<MotionSequence>& items) {
    std::string out = "M3TD";
    put(out, kVersion);
    put<std::uint64_t>(out, items.size());
    for (const auto& m : items) append_motion(out, m);
    return out;
}

std::vector<MotionSequence> dataset_from_bytes(const std::string& bytes) {
    Reader r(bytes);
    if (r.magic() != "M3TD") throw ParseError("not an M3TD dataset");
    if (r.get<std::uint32_t>("version") != kVersion) throw ParseError("unsupported dataset version");
    auto count = r.get<std::uint64_t>("item count");
    std::vector<MotionSequence> items;
    for (std::uint64_t i = 0; i < count; ++i) items.push_back(take_motion(r));
    if (!r.done()) throw ParseError("trailing bytes after dataset");
    return items;
}

std::vector<MotionSequence> read_dataset(const std::string& path) { return dataset_from_bytes(read_file(path)); }

void write_dataset(const std::vector<MotionSequence>& items, const std::string& path) {
    write_file(path, dataset_to_bytes(items));
}

}  // namespace m3t
