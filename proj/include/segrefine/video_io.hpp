#pragma once

// Raw video ingestion and output: YUV4MPEG2 streams (C420 family, C444,
// mono) and numbered binary PPM/PGM image sequences. Internally every frame
// is RGB float in [0,1]; conversion uses BT.601 limited-range coefficients.

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "segrefine/errors.hpp"
#include "segrefine/frame.hpp"

namespace segrefine {

namespace bt601 {
inline constexpr double kr = 0.299, kg = 0.587, kb = 0.114;

struct Rgb {
    double r, g, b;
};

/// 8-bit limited-range YCbCr to RGB in [0,1], clamped.
inline Rgb to_rgb(std::uint8_t y8, std::uint8_t cb8, std::uint8_t cr8) {
    const double y = (static_cast<double>(y8) - 16.0) / 219.0;
    const double cb = (static_cast<double>(cb8) - 128.0) / 224.0;
    const double cr = (static_cast<double>(cr8) - 128.0) / 224.0;
    const double r = y + 2.0 * (1.0 - kr) * cr;
    const double g = y - 2.0 * (1.0 - kb) * kb / kg * cb - 2.0 * (1.0 - kr) * kr / kg * cr;
    const double b = y + 2.0 * (1.0 - kb) * cb;
    return {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
}

inline std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

/// RGB in [0,1] to 8-bit limited-range Y, Cb, Cr (rounding half away from zero).
inline std::array<std::uint8_t, 3> to_ycbcr(double r, double g, double b) {
    const double y = kr * r + kg * g + kb * b;
    const double cb = (b - y) / (2.0 * (1.0 - kb));
    const double cr = (r - y) / (2.0 * (1.0 - kr));
    return {quantize(16.0 + 219.0 * y), quantize(128.0 + 224.0 * cb), quantize(128.0 + 224.0 * cr)};
}
}  // namespace bt601

/// Sequential frame producer. Lets `refine` stream a video of any length.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    /// Next frame, or nullopt once the source is exhausted.
    virtual std::optional<Frame> next() = 0;
    virtual std::size_t width() const = 0;
    virtual std::size_t height() const = 0;
    virtual Rational frame_rate() const { return {}; }
};

enum class Y4mChroma { C420, C444, Mono };

class Y4mReader : public FrameSource {
public:
    explicit Y4mReader(std::istream& is) : is_(is) { parse_header(); }

    std::size_t width() const override { return width_; }
    std::size_t height() const override { return height_; }
    Rational frame_rate() const override { return rate_; }
    Y4mChroma chroma() const noexcept { return chroma_; }
    std::size_t frames_read() const noexcept { return frames_; }

    std::optional<Frame> next() override {
        std::string line;
        if (!std::getline(is_, line)) {
            if (!line.empty())
                throw FormatError("y4m: truncated frame header at frame " +
                                  std::to_string(frames_ + 1));
            return std::nullopt;
        }
        if (line.rfind("FRAME", 0) != 0)
            throw FormatError("y4m: expected FRAME marker at frame " + std::to_string(frames_ + 1));
        const std::size_t W = width_, H = height_;
        const std::size_t cw = chroma_ == Y4mChroma::C420 ? (W + 1) / 2 : W;
        const std::size_t ch = chroma_ == Y4mChroma::C420 ? (H + 1) / 2 : H;
        const std::size_t luma_bytes = W * H;
        const std::size_t chroma_bytes = chroma_ == Y4mChroma::Mono ? 0 : cw * ch;
        buf_.resize(luma_bytes + 2 * chroma_bytes);
        is_.read(reinterpret_cast<char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (static_cast<std::size_t>(is_.gcount()) != buf_.size())
            throw FormatError("y4m: truncated data in frame " + std::to_string(frames_ + 1));
        ++frames_;

        Frame f(3, H, W);
        const std::uint8_t* yp = buf_.data();
        const std::uint8_t* cbp = yp + luma_bytes;
        const std::uint8_t* crp = cbp + chroma_bytes;
        for (std::size_t y = 0; y < H; ++y)
            for (std::size_t x = 0; x < W; ++x) {
                std::uint8_t cb = 128, cr = 128;
                if (chroma_ != Y4mChroma::Mono) {
                    const std::size_t ci = chroma_ == Y4mChroma::C420 ? (y / 2) * cw + x / 2 : y * W + x;
                    cb = cbp[ci];
                    cr = crp[ci];
                }
                const auto rgb = bt601::to_rgb(yp[y * W + x], cb, cr);
                f(0, y, x) = static_cast<float>(rgb.r);
                f(1, y, x) = static_cast<float>(rgb.g);
                f(2, y, x) = static_cast<float>(rgb.b);
            }
        return f;
    }

private:
    static Rational parse_ratio(std::string_view v, std::string_view what) {
        const auto colon = v.find(':');
        Rational r{};
        if (colon == std::string_view::npos ||
            std::from_chars(v.data(), v.data() + colon, r.num).ec != std::errc{} ||
            std::from_chars(v.data() + colon + 1, v.data() + v.size(), r.den).ec != std::errc{})
            throw FormatError("y4m: malformed " + std::string(what) + " token '" + std::string(v) + "'");
        return r;
    }

    void parse_header() {
        std::string line;
        if (!std::getline(is_, line) || line.rfind("YUV4MPEG2", 0) != 0)
            throw FormatError("y4m: missing YUV4MPEG2 signature");
        std::istringstream tokens(line.substr(9));
        std::string tok;
        bool have_w = false, have_h = false;
        while (tokens >> tok) {
            const std::string_view v = std::string_view(tok).substr(1);
            switch (tok[0]) {
                case 'W':
                case 'H': {
                    std::size_t n = 0;
                    if (std::from_chars(v.data(), v.data() + v.size(), n).ec != std::errc{} || n == 0)
                        throw FormatError("y4m: malformed dimension token '" + tok + "'");
                    (tok[0] == 'W' ? width_ : height_) = n;
                    (tok[0] == 'W' ? have_w : have_h) = true;
                    break;
                }
                case 'F':
                    rate_ = parse_ratio(v, "frame rate");
                    break;
                case 'C':
                    if (v == "420" || v == "420jpeg" || v == "420paldv" || v == "420mpeg2")
                        chroma_ = Y4mChroma::C420;
                    else if (v == "444")
                        chroma_ = Y4mChroma::C444;
                    else if (v == "mono")
                        chroma_ = Y4mChroma::Mono;
                    else
                        throw UnsupportedFormat("y4m: unsupported colorspace C" + std::string(v));
                    break;
                default:  // I, A, X: informational
                    break;
            }
        }
        if (!have_w || !have_h) throw FormatError("y4m: header lacks W or H");
    }

    std::istream& is_;
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    Rational rate_{};
    Y4mChroma chroma_ = Y4mChroma::C420;
    std::size_t frames_ = 0;
    std::vector<std::uint8_t> buf_;
};

/// Writes C444 (no chroma subsampling) 8-bit Y4M.
class Y4mWriter {
public:
    Y4mWriter(std::ostream& os, std::size_t width, std::size_t height, Rational rate = {})
        : os_(os), width_(width), height_(height) {
        if (width == 0 || height == 0) throw std::invalid_argument("y4m: empty frame geometry");
        std::ostringstream h;
        h << "YUV4MPEG2 W" << width << " H" << height << " F" << rate.num << ':' << rate.den
          << " Ip A1:1 C444\n";
        put(h.str());
    }

    void write(const Frame& f) {
        if (f.channels() != 3 || f.width() != width_ || f.height() != height_)
            throw std::invalid_argument("y4m: frame " + shape_string(f) + " does not match stream " +
                                        std::to_string(height_) + "x" + std::to_string(width_));
        const std::size_t n = width_ * height_;
        buf_.resize(3 * n);
        auto r = f.plane(0), g = f.plane(1), b = f.plane(2);
        for (std::size_t j = 0; j < n; ++j) {
            const auto ycc = bt601::to_ycbcr(r[j], g[j], b[j]);
            buf_[j] = ycc[0];
            buf_[n + j] = ycc[1];
            buf_[2 * n + j] = ycc[2];
        }
        put("FRAME\n");
        os_.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
        if (!os_) throw IoError("y4m: write failed");
        bytes_ += buf_.size();
    }

    std::size_t bytes_written() const noexcept { return bytes_; }

private:
    void put(const std::string& s) {
        os_ << s;
        if (!os_) throw IoError("y4m: write failed");
        bytes_ += s.size();
    }

    std::ostream& os_;
    std::size_t width_;
    std::size_t height_;
    std::size_t bytes_ = 0;
    std::vector<std::uint8_t> buf_;
};

inline FrameSequence read_y4m(std::istream& source) {
    Y4mReader reader(source);
    FrameSequence seq;
    seq.frame_rate = reader.frame_rate();
    while (auto f = reader.next()) seq.frames.push_back(std::move(*f));
    if (seq.empty()) throw FormatError("y4m: stream contains no frames");
    return seq;
}

inline std::size_t write_y4m(const FrameSequence& sequence, std::ostream& sink) {
    if (sequence.empty()) throw std::invalid_argument("write_y4m: empty sequence");
    sequence.validate();
    Y4mWriter w(sink, sequence.width(), sequence.height(), sequence.frame_rate);
    for (const auto& f : sequence.frames) w.write(f);
    sink.flush();
    return w.bytes_written();
}

// ---- numbered PPM/PGM sequences ------------------------------------------

namespace detail {

inline std::string read_pnm_token(std::istream& is) {
    std::string tok;
    char c;
    while (is.get(c)) {
        if (c == '#') {
            std::string skip;
            std::getline(is, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(c);
    }
    return tok;
}

}  // namespace detail

/// Binary P6 (RGB) or P5 (gray, replicated to 3 channels), maxval <= 255.
inline Frame read_pnm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    const std::string magic = detail::read_pnm_token(is);
    if (magic != "P6" && magic != "P5")
        throw UnsupportedFormat(path.string() + ": not a binary PPM/PGM file");
    std::size_t dims[3] = {};
    for (auto& d : dims) {
        const std::string tok = detail::read_pnm_token(is);
        if (std::from_chars(tok.data(), tok.data() + tok.size(), d).ec != std::errc{} || d == 0)
            throw FormatError(path.string() + ": malformed header");
    }
    const std::size_t W = dims[0], H = dims[1], maxval = dims[2];
    if (maxval > 255) throw UnsupportedFormat(path.string() + ": only 8-bit images are supported");
    const std::size_t ch = magic == "P6" ? 3 : 1;
    std::vector<unsigned char> px(W * H * ch);
    is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (static_cast<std::size_t>(is.gcount()) != px.size())
        throw FormatError(path.string() + ": truncated pixel data");
    Frame f(3, H, W);
    const float scale = static_cast<float>(maxval);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            for (std::size_t c = 0; c < 3; ++c)
                f(c, y, x) = static_cast<float>(px[(y * W + x) * ch + (ch == 3 ? c : 0)]) / scale;
    return f;
}

inline void write_ppm(const std::filesystem::path& path, const Frame& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot create " + path.string());
    os << "P6\n" << f.width() << ' ' << f.height() << "\n255\n";
    std::vector<unsigned char> px(f.plane_size() * 3);
    for (std::size_t y = 0; y < f.height(); ++y)
        for (std::size_t x = 0; x < f.width(); ++x)
            for (std::size_t c = 0; c < 3; ++c)
                px[(y * f.width() + x) * 3 + c] =
                    bt601::quantize(255.0 * std::clamp(static_cast<double>(f(c, y, x)), 0.0, 1.0));
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

/// Files of a numbered image sequence, in frame order. `pattern` is either
/// a directory (all .ppm/.pgm/.pnm files with a trailing frame number) or a
/// printf-style path such as "frames/f%04d.ppm".
inline std::vector<std::filesystem::path> list_image_sequence(const std::string& pattern) {
    namespace fs = std::filesystem;
    fs::path dir;
    std::string prefix, suffix;
    std::size_t pad = 0;
    const bool is_dir = fs::is_directory(pattern);
    if (is_dir) {
        dir = pattern;
    } else {
        const fs::path p(pattern);
        dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
        const std::string name = p.filename().string();
        const auto pct = name.find('%');
        const auto d = pct == std::string::npos ? std::string::npos : name.find('d', pct);
        if (d == std::string::npos)
            throw std::invalid_argument("image sequence pattern needs a %d field: " + pattern);
        prefix = name.substr(0, pct);
        suffix = name.substr(d + 1);
        const std::string width = name.substr(pct + 1, d - pct - 1);
        if (!width.empty()) pad = static_cast<std::size_t>(std::stoul(width));
        if (!fs::is_directory(dir)) throw IoError("no such directory: " + dir.string());
    }

    std::map<std::size_t, fs::path> numbered;
    std::optional<std::string> common_prefix;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        std::string digits;
        if (is_dir) {
            const std::string ext = entry.path().extension().string();
            if (ext != ".ppm" && ext != ".pgm" && ext != ".pnm") continue;
            const std::string stem = entry.path().stem().string();
            auto it = std::find_if(stem.rbegin(), stem.rend(),
                                   [](char c) { return !std::isdigit(static_cast<unsigned char>(c)); });
            const std::size_t ndig = static_cast<std::size_t>(it - stem.rbegin());
            if (ndig == 0) continue;
            digits = stem.substr(stem.size() - ndig);
            const std::string pre = stem.substr(0, stem.size() - ndig) + "|" + ext;
            if (common_prefix && *common_prefix != pre)
                throw std::invalid_argument("mixed file names in image directory: " + name);
            common_prefix = pre;
        } else {
            if (name.size() <= prefix.size() + suffix.size() || name.rfind(prefix, 0) != 0 ||
                name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0)
                continue;
            digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
            if (digits.empty() || !std::all_of(digits.begin(), digits.end(), [](char c) {
                    return std::isdigit(static_cast<unsigned char>(c));
                }))
                continue;
            if (pad > 0 && digits.size() != pad) continue;
        }
        numbered.emplace(std::stoul(digits), entry.path());
    }
    if (numbered.empty()) throw FormatError("no numbered images match " + pattern);
    std::vector<fs::path> out;
    std::size_t expect = numbered.begin()->first;
    for (const auto& [n, path] : numbered) {
        if (n != expect)
            throw FormatError("image sequence gap: frame number " + std::to_string(expect) +
                              " missing in " + pattern);
        out.push_back(path);
        ++expect;
    }
    return out;
}

class ImageSequenceReader : public FrameSource {
public:
    explicit ImageSequenceReader(const std::string& pattern)
        : files_(list_image_sequence(pattern)) {
        first_ = read_pnm(files_.front());
        width_ = first_->width();
        height_ = first_->height();
    }

    std::size_t width() const override { return width_; }
    std::size_t height() const override { return height_; }

    std::optional<Frame> next() override {
        if (pos_ >= files_.size()) return std::nullopt;
        Frame f = pos_ == 0 && first_ ? std::move(*first_) : read_pnm(files_[pos_]);
        first_.reset();
        if (f.width() != width_ || f.height() != height_)
            throw std::invalid_argument("image " + files_[pos_].string() + " is " +
                                        std::to_string(f.width()) + "x" + std::to_string(f.height()) +
                                        ", sequence is " + std::to_string(width_) + "x" +
                                        std::to_string(height_));
        ++pos_;
        return f;
    }

private:
    std::vector<std::filesystem::path> files_;
    std::optional<Frame> first_;
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::size_t pos_ = 0;
};

inline FrameSequence read_image_dir(const std::string& pattern) {
    ImageSequenceReader reader(pattern);
    FrameSequence seq;
    while (auto f = reader.next()) seq.frames.push_back(std::move(*f));
    return seq;
}

/// Opens a .y4m file or an image sequence (directory or %d pattern).
class VideoFile : public FrameSource {
public:
    explicit VideoFile(const std::string& path) {
        if (std::filesystem::is_directory(path) || path.find('%') != std::string::npos) {
            inner_ = std::make_unique<ImageSequenceReader>(path);
            return;
        }
        file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
        if (!*file_) throw IoError("cannot open " + path);
        inner_ = std::make_unique<Y4mReader>(*file_);
    }

    std::optional<Frame> next() override { return inner_->next(); }
    std::size_t width() const override { return inner_->width(); }
    std::size_t height() const override { return inner_->height(); }
    Rational frame_rate() const override { return inner_->frame_rate(); }

private:
    std::unique_ptr<std::ifstream> file_;
    std::unique_ptr<FrameSource> inner_;
};

inline FrameSequence read_video(const std::string& path) {
    VideoFile src(path);
    FrameSequence seq;
    seq.frame_rate = src.frame_rate();
    while (auto f = src.next()) seq.frames.push_back(std::move(*f));
    if (seq.empty()) throw FormatError(path + ": no frames");
    return seq;
}

inline std::size_t write_y4m_file(const std::string& path, const FrameSequence& seq) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot create " + path);
    return write_y4m(seq, os);
}

}  // namespace segrefine
