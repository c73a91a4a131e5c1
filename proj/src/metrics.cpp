#include "pags/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace pags {

namespace {

void check_same(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("image dimensions differ");
}

double psnr_from_mse(double mse) {
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> gaussian_window(const SsimOptions& o) {
    std::vector<double> w(o.window);
    const double c = 0.5 * (o.window - 1);
    double sum = 0.0;
    for (int i = 0; i < o.window; ++i) {
        w[i] = std::exp(-0.5 * (i - c) * (i - c) / (o.sigma * o.sigma));
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

/// Separable valid-mode filtering of one channel plane.
struct Filter {
    std::vector<double> w;
    int width, height, ow, oh;

    std::vector<double> valid(const std::vector<double>& in) const {
        const int k = static_cast<int>(w.size());
        std::vector<double> tmp(static_cast<std::size_t>(ow) * height);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < k; ++i) s += w[i] * in[static_cast<std::size_t>(y) * width + x + i];
                tmp[static_cast<std::size_t>(y) * ow + x] = s;
            }
        std::vector<double> out(static_cast<std::size_t>(ow) * oh);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double s = 0.0;
                for (int i = 0; i < k; ++i) s += w[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
                out[static_cast<std::size_t>(y) * ow + x] = s;
            }
        return out;
    }

    /// Adjoint of valid(): scatters an output-sized map back to input size.
    std::vector<double> adjoint(const std::vector<double>& out) const {
        const int k = static_cast<int>(w.size());
        std::vector<double> tmp(static_cast<std::size_t>(ow) * height, 0.0);
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double v = out[static_cast<std::size_t>(y) * ow + x];
                for (int i = 0; i < k; ++i) tmp[static_cast<std::size_t>(y + i) * ow + x] += w[i] * v;
            }
        std::vector<double> in(static_cast<std::size_t>(width) * height, 0.0);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < ow; ++x) {
                const double v = tmp[static_cast<std::size_t>(y) * ow + x];
                for (int i = 0; i < k; ++i) in[static_cast<std::size_t>(y) * width + x + i] += w[i] * v;
            }
        return in;
    }
};

double ssim_impl(std::span<const double> a, std::span<const double> b, int width, int height, double* grad_a,
                 const SsimOptions& o) {
    check_same(a, b);
    if (a.size() != static_cast<std::size_t>(width) * height * 3) throw DimensionError("image size mismatch");
    if (width < o.window || height < o.window) throw DimensionError("image smaller than the SSIM window");
    const Filter f{gaussian_window(o), width, height, width - o.window + 1, height - o.window + 1};
    const double c1 = o.k1 * o.k1, c2 = o.k2 * o.k2;
    const std::size_t np = static_cast<std::size_t>(width) * height;
    const std::size_t no = static_cast<std::size_t>(f.ow) * f.oh;
    const double norm = 1.0 / (3.0 * no);

    double total = 0.0;
    std::vector<double> x(np), y(np), xx(np), yy(np), xy(np);
    for (int ch = 0; ch < 3; ++ch) {
        for (std::size_t p = 0; p < np; ++p) {
            x[p] = a[3 * p + ch];
            y[p] = b[3 * p + ch];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = f.valid(x), my = f.valid(y), mxx = f.valid(xx), myy = f.valid(yy), mxy = f.valid(xy);
        std::vector<double> ga, gb, gc;
        if (grad_a) {
            ga.resize(no);
            gb.resize(no);
            gc.resize(no);
        }
        for (std::size_t q = 0; q < no; ++q) {
            const double vx = mxx[q] - mx[q] * mx[q], vy = myy[q] - my[q] * my[q], cxy = mxy[q] - mx[q] * my[q];
            const double a1 = 2.0 * mx[q] * my[q] + c1, a2 = 2.0 * cxy + c2;
            const double b1 = mx[q] * mx[q] + my[q] * my[q] + c1, b2 = vx + vy + c2;
            const double s = a1 * a2 / (b1 * b2);
            total += s;
            if (grad_a) {
                // dS/dx_k = w_k (alpha + beta x_k + gamma y_k)
                const double inv = 1.0 / (b1 * b2);
                const double beta = -2.0 * s / b2;
                const double gamma = 2.0 * a1 * inv;
                const double alpha =
                    2.0 * my[q] * a2 * inv - gamma * my[q] - 2.0 * s * mx[q] / b1 + 2.0 * s * mx[q] / b2;
                ga[q] = alpha * norm;
                gb[q] = beta * norm;
                gc[q] = gamma * norm;
            }
        }
        if (grad_a) {
            const auto ta = f.adjoint(ga), tb = f.adjoint(gb), tc = f.adjoint(gc);
            for (std::size_t p = 0; p < np; ++p) grad_a[3 * p + ch] = ta[p] + tb[p] * x[p] + tc[p] * y[p];
        }
    }
    return total * norm;
}

}  // namespace

double psnr(std::span<const double> a, std::span<const double> b) {
    check_same(a, b);
    if (a.empty()) throw DimensionError("psnr of empty images");
    double se = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
    return psnr_from_mse(se / a.size());
}

std::optional<double> masked_psnr(std::span<const double> a, std::span<const double> b,
                                  std::span<const std::uint8_t> mask) {
    check_same(a, b);
    if (a.size() != 3 * mask.size()) throw DimensionError("mask does not match image");
    double se = 0.0;
    std::size_t n = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        if (!mask[p]) continue;
        for (int c = 0; c < 3; ++c) se += (a[3 * p + c] - b[3 * p + c]) * (a[3 * p + c] - b[3 * p + c]);
        n += 3;
    }
    if (n == 0) return std::nullopt;
    return psnr_from_mse(se / n);
}

double ssim(std::span<const double> a, std::span<const double> b, int width, int height,
            const SsimOptions& options) {
    return ssim_impl(a, b, width, height, nullptr, options);
}

double ssim_with_grad(std::span<const double> a, std::span<const double> b, int width, int height,
                      std::span<double> grad_a, const SsimOptions& options) {
    if (grad_a.size() != a.size()) throw DimensionError("gradient buffer size mismatch");
    return ssim_impl(a, b, width, height, grad_a.data(), options);
}

PhotometricLoss photometric_loss(std::span<const double> rendered, std::span<const double> target, int width,
                                 int height, double lambda) {
    check_same(rendered, target);
    PhotometricLoss out;
    out.grad.assign(rendered.size(), 0.0);
    out.ssim = ssim_with_grad(rendered, target, width, height, out.grad);
    const double n = static_cast<double>(rendered.size());
    double l1 = 0.0;
    for (std::size_t i = 0; i < rendered.size(); ++i) {
        const double d = rendered[i] - target[i];
        l1 += std::abs(d);
        const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
        out.grad[i] = (1.0 - lambda) * sign / n - lambda * out.grad[i];
    }
    out.l1 = l1 / n;
    out.value = (1.0 - lambda) * out.l1 + lambda * (1.0 - out.ssim);
    return out;
}


MetricsReport compare_images(std::span<const double> rendered, std::span<const double> target, int width,
                             int height, std::span<const std::uint8_t> critical) {
    check_same(rendered, target);
    const std::size_t n = static_cast<std::size_t>(width) * height;
    if (rendered.size() != n * 3) throw DimensionError("image size mismatch");
    if (!critical.empty() && critical.size() != n) throw DimensionError("mask size mismatch");
    MetricsReport r;
    r.psnr_global = psnr(rendered, target);
    r.pixels_global = n;
    std::vector<std::uint8_t> crit(n, 0), rest(n, 1);
    for (std::size_t p = 0; p < critical.size(); ++p) {
        crit[p] = critical[p] != 0;
        rest[p] = critical[p] == 0;
    }
    r.pixels_critical = static_cast<std::size_t>(std::count(crit.begin(), crit.end(), 1));
    r.pixels_noncritical = n - r.pixels_critical;
    r.psnr_critical = masked_psnr(rendered, target, crit);
    r.psnr_noncritical = masked_psnr(rendered, target, rest);
    if (width >= SsimOptions{}.window && height >= SsimOptions{}.window)
        r.ssim = ssim(rendered, target, width, height);
    return r;
}

void write_metrics_report(std::ostream& os, const MetricsReport& r) {
    auto opt = [&](const char* key, const auto& v) {
        os << ' ' << key << '=';
        if (v) os << *v;
        else os << "absent";
    };
    os << "psnr_global=" << r.psnr_global;
    opt("psnr_critical", r.psnr_critical);
    opt("psnr_noncritical", r.psnr_noncritical);
    opt("ssim", r.ssim);
    os << " pixels_global=" << r.pixels_global << " pixels_critical=" << r.pixels_critical
       << " pixels_noncritical=" << r.pixels_noncritical;
    opt("gaussian_count", r.gaussian_count);
    opt("fps_equivalent", r.fps_equivalent);
    opt("train_time_s", r.train_time_s);
    os << '\n';
}

}  // namespace pags
