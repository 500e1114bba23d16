#pragma once

// PSNR, single-scale SSIM and 5-scale MS-SSIM on [0,1] frames, plus the
// per-frame quality report used by `segrefine eval`.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "segrefine/frame.hpp"
#include "segrefine/segmentation.hpp"
#include "segrefine/sidecar.hpp"

namespace segrefine {

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(1 / MSE) over all channels with peak 1.0. +inf for identical frames.
inline double psnr(const Frame& a, const Frame& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("psnr: frame dimensions differ (" + shape_string(a) + " vs " +
                                    shape_string(b) + ")");
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = static_cast<double>(a[j]) - static_cast<double>(b[j]);
        sum += d * d;
    }
    if (sum == 0.0) return kPsnrIdentical;
    return 10.0 * std::log10(static_cast<double>(a.size()) / sum);
}

/// Single-channel double image used inside the SSIM family.
struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> px;

    double at(std::size_t y, std::size_t x) const { return px[y * width + x]; }
};

/// BT.601 luma of an RGB frame.
inline Plane luma(const Frame& f) {
    if (f.channels() != 3) throw std::invalid_argument("luma: expected 3 channels");
    Plane p{f.height(), f.width(), std::vector<double>(f.plane_size())};
    auto r = f.plane(0), g = f.plane(1), b = f.plane(2);
    for (std::size_t j = 0; j < p.px.size(); ++j)
        p.px[j] = 0.299 * r[j] + 0.587 * g[j] + 0.114 * b[j];
    return p;
}

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

struct SsimStats {
    double ssim = 1.0;  // mean of l*c*s over valid window positions
    double cs = 1.0;    // mean of c*s
};

namespace detail {

inline std::vector<double> gaussian_window(std::size_t n, double sigma) {
    std::vector<double> w(n);
    const double c = static_cast<double>(n - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(i) - c;
        w[i] = std::exp(-(d * d) / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

// Separable "valid" filtering: output is (H-n+1) x (W-n+1).
inline std::vector<double> filter_valid(const std::vector<double>& img, std::size_t H,
                                        std::size_t W, std::span<const double> w) {
    const std::size_t n = w.size();
    const std::size_t oh = H - n + 1, ow = W - n + 1;
    std::vector<double> tmp(H * ow);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += w[k] * img[y * W + x + k];
            tmp[y * ow + x] = s;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += w[k] * tmp[(y + k) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

}  // namespace detail

inline SsimStats ssim_stats(const Plane& a, const Plane& b, const SsimParams& prm = {}) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("ssim: frame dimensions differ");
    if (std::min(a.height, a.width) < prm.window)
        throw std::invalid_argument("ssim: frame smaller than the " + std::to_string(prm.window) +
                                    "x" + std::to_string(prm.window) + " window");
    const std::size_t H = a.height, W = a.width;
    const auto w = detail::gaussian_window(prm.window, prm.sigma);
    std::vector<double> aa(H * W), bb(H * W), ab(H * W);
    for (std::size_t j = 0; j < H * W; ++j) {
        aa[j] = a.px[j] * a.px[j];
        bb[j] = b.px[j] * b.px[j];
        ab[j] = a.px[j] * b.px[j];
    }
    const auto mu_a = detail::filter_valid(a.px, H, W, w);
    const auto mu_b = detail::filter_valid(b.px, H, W, w);
    const auto e_aa = detail::filter_valid(aa, H, W, w);
    const auto e_bb = detail::filter_valid(bb, H, W, w);
    const auto e_ab = detail::filter_valid(ab, H, W, w);

    const double c1 = std::pow(prm.k1 * prm.dynamic_range, 2);
    const double c2 = std::pow(prm.k2 * prm.dynamic_range, 2);
    double ssim_sum = 0.0, cs_sum = 0.0;
    for (std::size_t j = 0; j < mu_a.size(); ++j) {
        const double ma = mu_a[j], mb = mu_b[j];
        const double va = e_aa[j] - ma * ma;
        const double vb = e_bb[j] - mb * mb;
        const double cov = e_ab[j] - ma * mb;
        const double cs = (2.0 * cov + c2) / (va + vb + c2);
        const double l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
        cs_sum += cs;
        ssim_sum += l * cs;
    }
    const double n = static_cast<double>(mu_a.size());
    return {ssim_sum / n, cs_sum / n};
}

inline double ssim(const Frame& a, const Frame& b, const SsimParams& prm = {}) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: frame dimensions differ");
    return ssim_stats(luma(a), luma(b), prm).ssim;
}

/// 2x2 mean; odd trailing row/column dropped.
inline Plane downsample2(const Plane& p) {
    Plane o{p.height / 2, p.width / 2, {}};
    o.px.resize(o.height * o.width);
    for (std::size_t y = 0; y < o.height; ++y)
        for (std::size_t x = 0; x < o.width; ++x)
            o.px[y * o.width + x] = 0.25 * (p.at(2 * y, 2 * x) + p.at(2 * y, 2 * x + 1) +
                                            p.at(2 * y + 1, 2 * x) + p.at(2 * y + 1, 2 * x + 1));
    return o;
}

inline constexpr std::array<double, 5> kMsSsimWeights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Number of MS-SSIM scales a frame of this size supports (0 if none).
inline std::size_t ms_ssim_scale_count(std::size_t height, std::size_t width,
                                       std::size_t window = 11) {
    std::size_t m = 0;
    std::size_t need = window;
    while (m < kMsSsimWeights.size() && std::min(height, width) >= need) {
        ++m;
        need *= 2;
    }
    return m;
}

struct MsSsimResult {
    double value = 1.0;
    std::size_t scales = 0;
    std::vector<double> cs;  // per scale; last entry is the full SSIM at the coarsest scale
};

/// Contrast-structure at scales 1..M-1, full SSIM at scale M, exponents
/// renormalized when fewer than five scales fit. Negative terms clamp to 0.
inline MsSsimResult ms_ssim_detail(const Frame& a, const Frame& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ms_ssim: frame dimensions differ");
    const std::size_t m = ms_ssim_scale_count(a.height(), a.width());
    if (m == 0)
        throw std::invalid_argument("ms_ssim: frame " + shape_string(a) +
                                    " too small for a single 11x11 scale");
    double wsum = 0.0;
    for (std::size_t s = 0; s < m; ++s) wsum += kMsSsimWeights[s];

    MsSsimResult r;
    r.scales = m;
    Plane pa = luma(a), pb = luma(b);
    for (std::size_t s = 0; s < m; ++s) {
        const SsimStats st = ssim_stats(pa, pb);
        const bool last = s + 1 == m;
        const double term = std::max(last ? st.ssim : st.cs, 0.0);
        r.cs.push_back(term);
        r.value *= std::pow(term, kMsSsimWeights[s] / wsum);
        if (!last) {
            pa = downsample2(pa);
            pb = downsample2(pb);
        }
    }
    return r;
}

inline double ms_ssim(const Frame& a, const Frame& b) { return ms_ssim_detail(a, b).value; }

struct FrameQuality {
    std::size_t frame = 0;  // 1-based
    double psnr_degraded = 0.0;
    double psnr_refined = 0.0;
    double ms_ssim_degraded = 0.0;
    double ms_ssim_refined = 0.0;
};

struct SegmentQuality {
    SegmentDescriptor segment;
    double mean_psnr_degraded = 0.0;
    double mean_psnr_refined = 0.0;
    double mean_ms_ssim_degraded = 0.0;
    double mean_ms_ssim_refined = 0.0;
};

struct QualityReport {
    std::vector<FrameQuality> frames;
    std::vector<SegmentQuality> segments;
    double mean_psnr_degraded = 0.0;
    double mean_psnr_refined = 0.0;
    double mean_ms_ssim_degraded = 0.0;
    double mean_ms_ssim_refined = 0.0;
    std::size_t sidecar_bytes = 0;
    double sidecar_bpp = 0.0;
    std::size_t encoded_bytes = 0;  // 0 when unknown
};

/// Builds a QualityReport one frame at a time.
class QualityAccumulator {
public:
    void add(const Frame& original, const Frame& degraded, const Frame& refined) {
        if (!original.same_shape(degraded) || !original.same_shape(refined))
            throw std::invalid_argument("evaluate: frame " + std::to_string(rows_.size() + 1) +
                                        " dimensions differ");
        FrameQuality q;
        q.frame = rows_.size() + 1;
        q.psnr_degraded = psnr(degraded, original);
        q.psnr_refined = psnr(refined, original);
        q.ms_ssim_degraded = ms_ssim(degraded, original);
        q.ms_ssim_refined = ms_ssim(refined, original);
        rows_.push_back(q);
        width_ = original.width();
        height_ = original.height();
    }

    std::size_t count() const noexcept { return rows_.size(); }

    QualityReport finish(std::size_t rho, std::size_t sidecar_bytes) const;

private:
    std::vector<FrameQuality> rows_;
    std::size_t width_ = 0;
    std::size_t height_ = 0;
};

namespace detail {
inline double mean_of(std::span<const FrameQuality> rows, double FrameQuality::*field) {
    double s = 0.0;
    for (const auto& r : rows) s += r.*field;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}
}  // namespace detail

inline QualityReport QualityAccumulator::finish(std::size_t rho, std::size_t sidecar_bytes) const {
    if (rows_.empty()) throw std::invalid_argument("evaluate: no frames");
    QualityReport r;
    r.frames = rows_;
    std::span<const FrameQuality> all(rows_);
    r.mean_psnr_degraded = detail::mean_of(all, &FrameQuality::psnr_degraded);
    r.mean_psnr_refined = detail::mean_of(all, &FrameQuality::psnr_refined);
    r.mean_ms_ssim_degraded = detail::mean_of(all, &FrameQuality::ms_ssim_degraded);
    r.mean_ms_ssim_refined = detail::mean_of(all, &FrameQuality::ms_ssim_refined);
    for (const auto& seg : partition(rows_.size(), SegmentationConfig{rho})) {
        auto part = all.subspan(seg.start_frame - 1, seg.length());
        r.segments.push_back({seg, detail::mean_of(part, &FrameQuality::psnr_degraded),
                              detail::mean_of(part, &FrameQuality::psnr_refined),
                              detail::mean_of(part, &FrameQuality::ms_ssim_degraded),
                              detail::mean_of(part, &FrameQuality::ms_ssim_refined)});
    }
    r.sidecar_bytes = sidecar_bytes;
    r.sidecar_bpp = rate_overhead(sidecar_bytes, rows_.size(), width_, height_);
    return r;
}

/// Per-frame and mean metrics of degraded and refined against original.
inline QualityReport evaluate(const FrameSequence& original, const FrameSequence& degraded,
                              const FrameSequence& refined, std::size_t sidecar_bytes,
                              std::size_t rho = 50) {
    require_same_geometry(original, degraded, "evaluate");
    require_same_geometry(original, refined, "evaluate");
    QualityAccumulator acc;
    for (std::size_t t = 0; t < original.size(); ++t)
        acc.add(original.frames[t], degraded.frames[t], refined.frames[t]);
    return acc.finish(rho, sidecar_bytes);
}

/// Tab-separated per-frame records followed by a `# summary` footer.
inline void write_quality_report(std::ostream& os, const QualityReport& r) {
    const auto flags = os.flags();
    const auto prec = os.precision();
    os << "frame\tpsnr_degraded\tpsnr_refined\tms_ssim_degraded\tms_ssim_refined\n";
    os << std::fixed;
    for (const auto& f : r.frames)
        os << f.frame << '\t' << std::setprecision(4) << f.psnr_degraded << '\t' << f.psnr_refined
           << '\t' << std::setprecision(6) << f.ms_ssim_degraded << '\t' << f.ms_ssim_refined
           << '\n';
    os << "# summary\n";
    os << "frames\t" << r.frames.size() << '\n';
    os << std::setprecision(4) << "mean_psnr_degraded\t" << r.mean_psnr_degraded << '\n'
       << "mean_psnr_refined\t" << r.mean_psnr_refined << '\n'
       << "psnr_gain_db\t" << r.mean_psnr_refined - r.mean_psnr_degraded << '\n';
    os << std::setprecision(6) << "mean_ms_ssim_degraded\t" << r.mean_ms_ssim_degraded << '\n'
       << "mean_ms_ssim_refined\t" << r.mean_ms_ssim_refined << '\n';
    for (const auto& s : r.segments)
        os << "segment\t" << s.segment.index << '\t' << s.segment.start_frame << '-'
           << s.segment.end_frame << '\t' << std::setprecision(4) << s.mean_psnr_degraded << '\t'
           << s.mean_psnr_refined << '\t' << std::setprecision(6) << s.mean_ms_ssim_degraded
           << '\t' << s.mean_ms_ssim_refined << '\n';
    os << "sidecar_bytes\t" << r.sidecar_bytes << '\n';
    os << std::setprecision(6) << "sidecar_bpp\t" << r.sidecar_bpp << '\n';
    if (r.encoded_bytes > 0) {
        os << "encoded_bytes\t" << r.encoded_bytes << '\n';
        os << "total_bits\t" << 8 * (r.encoded_bytes + r.sidecar_bytes) << '\n';
    }
    os.flags(flags);
    os.precision(prec);
}

}  // namespace segrefine
