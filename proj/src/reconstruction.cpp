#include "modsr/reconstruction.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "modsr/error.hpp"

namespace modsr {

void BtvParams::validate() const {
    if (window < 1) throw ConfigError("BTV window must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("BTV alpha must lie in (0, 1)");
    if (!(lambda >= 0.0)) throw ConfigError("BTV lambda must be nonnegative");
    if (!(epsilon > 0.0)) throw ConfigError("BTV epsilon must be positive");
}

void SolverOptions::validate() const {
    if (max_outer < 1 || max_cg < 1) throw ConfigError("solver iteration limits must be positive");
    if (!(grad_tol > 0.0 && grad_tol < 1.0)) throw ConfigError("solver grad_tol must lie in (0, 1)");
}

std::vector<Shift> btv_shifts(const BtvParams& p) {
    std::vector<Shift> shifts;
    for (int dy = -p.window; dy <= p.window; ++dy)
        for (int dx = -p.window; dx <= p.window; ++dx)
            if (dx != 0 || dy != 0) shifts.push_back({dx, dy, std::pow(p.alpha, std::abs(dx) + std::abs(dy))});
    return shifts;
}

namespace {

// Visits every (pixel, shifted neighbour) pair of one shift with replicate boundaries.
template <class Fn>
void for_each_pair(int w, int h, const Shift& s, Fn&& fn) {
    for (int y = 0; y < h; ++y) {
        const int ys = std::clamp(y + s.dy, 0, h - 1);
        const std::size_t row = static_cast<std::size_t>(y) * w;
        const std::size_t srow = static_cast<std::size_t>(ys) * w;
        for (int x = 0; x < w; ++x) {
            const int xs = std::clamp(x + s.dx, 0, w - 1);
            fn(row + x, srow + xs);
        }
    }
}

double btv_value_grad_raw(std::span<const double> f, int w, int h, const BtvParams& p, const BtvWeights* weights,
                          std::span<double> grad) {
    const auto shifts = btv_shifts(p);
    const double eps = p.epsilon;
    double value = 0.0;
    for (std::size_t si = 0; si < shifts.size(); ++si) {
        const Shift& s = shifts[si];
        const double* wk = weights ? (*weights)[si].data() : nullptr;
        double acc = 0.0;
        for_each_pair(w, h, s, [&](std::size_t k, std::size_t ks) {
            const double t = f[k] - f[ks];
            const double root = std::sqrt(t * t + eps * eps);
            const double c = wk ? s.weight * wk[k] : s.weight;
            acc += c * (root - eps);
            if (!grad.empty()) {
                const double d = c * t / root;
                grad[k] += d;
                grad[ks] -= d;
            }
        });
        value += acc;
    }
    return value;
}

// Second directional derivative of R along `dir` at f.
double btv_curvature(std::span<const double> f, std::span<const double> dir, int w, int h, const BtvParams& p,
                     const BtvWeights* weights) {
    const auto shifts = btv_shifts(p);
    const double eps2 = p.epsilon * p.epsilon;
    double curv = 0.0;
    for (std::size_t si = 0; si < shifts.size(); ++si) {
        const Shift& s = shifts[si];
        const double* wk = weights ? (*weights)[si].data() : nullptr;
        for_each_pair(w, h, s, [&](std::size_t k, std::size_t ks) {
            const double t = f[k] - f[ks];
            const double dd = dir[k] - dir[ks];
            const double q = t * t + eps2;
            const double c = wk ? s.weight * wk[k] : s.weight;
            curv += c * eps2 / (q * std::sqrt(q)) * dd * dd;
        });
    }
    return curv;
}

void check_frames(const ImageGrid& f, const std::vector<ImageGrid>& frames, const std::vector<SystemMatrix>& matrices) {
    if (frames.size() != matrices.size()) throw DataError("frame and system matrix counts differ");
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const SystemMatrix& m = matrices[i];
        if (m.hr_width() != f.width() || m.hr_height() != f.height())
            throw DataError("system matrix " + std::to_string(i) + " does not match the HR image size");
        if (m.lr_width() != frames[i].width() || m.lr_height() != frames[i].height())
            throw DataError("system matrix " + std::to_string(i) + " does not match its LR frame size");
    }
}

// Per-frame weights with zeros on invalid rows and masked LR pixels.
std::vector<std::vector<double>> effective_weights(const std::vector<ImageGrid>& frames,
                                                   const std::vector<SystemMatrix>& matrices,
                                                   const DataWeights* weights) {
    std::vector<std::vector<double>> out(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        out[i].resize(frames[i].size());
        for (std::size_t r = 0; r < frames[i].size(); ++r) {
            const bool ok = matrices[i].row_valid(r) && frames[i].valid(r);
            out[i][r] = ok ? (weights ? (*weights)[i][r] : 1.0) : 0.0;
        }
    }
    return out;
}

}  // namespace

ValueGrad btv_value_grad(const ImageGrid& f, const BtvParams& p, const BtvWeights* weights) {
    p.validate();
    ValueGrad out;
    out.gradient = ImageGrid(f.width(), f.height());
    out.value = btv_value_grad_raw(f.pixels(), f.width(), f.height(), p, weights, out.gradient.pixels());
    return out;
}

ValueGrad data_value_grad(const ImageGrid& f, const std::vector<ImageGrid>& frames,
                          const std::vector<SystemMatrix>& matrices, const DataWeights* weights) {
    check_frames(f, frames, matrices);
    const auto w = effective_weights(frames, matrices, weights);
    ValueGrad out;
    out.gradient = ImageGrid(f.width(), f.height());
    std::vector<double> residual;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        residual.assign(frames[i].size(), 0.0);
        matrices[i].multiply(f.pixels(), residual);
        for (std::size_t r = 0; r < residual.size(); ++r) {
            residual[r] -= frames[i][r];
            out.value += w[i][r] * residual[r] * residual[r];
            residual[r] *= 2.0;
        }
        matrices[i].multiply_transpose_add(residual, w[i], out.gradient.pixels());
    }
    return out;
}

std::vector<double> update_robust_weights(std::span<const double> residuals) {
    if (residuals.empty()) throw DataError("update_robust_weights: empty residual set");
    constexpr double kHuberC = 1.345;
    std::vector<double> tmp(residuals.begin(), residuals.end());
    const auto mid = tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2);
    std::nth_element(tmp.begin(), mid, tmp.end());
    const double median = *mid;
    for (std::size_t k = 0; k < tmp.size(); ++k) tmp[k] = std::abs(residuals[k] - median);
    std::nth_element(tmp.begin(), mid, tmp.end());
    const double scale = 1.4826 * *mid;
    std::vector<double> w(residuals.size(), 1.0);
    if (!(scale > 0.0)) return w;
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double a = std::abs(residuals[k]);
        if (a > 0.0) w[k] = std::min(1.0, kHuberC * scale / a);
    }
    return w;
}

ReconstructionReport solve_map(const std::vector<ImageGrid>& frames, const std::vector<SystemMatrix>& matrices,
                               const BtvParams& p, const SolverOptions& opts, const ImageGrid& init) {
    p.validate();
    opts.validate();
    check_frames(init, frames, matrices);
    const auto t0 = std::chrono::steady_clock::now();
    const int w = init.width();
    const int h = init.height();
    const std::size_t n = init.size();
    const std::size_t n_frames = frames.size();

    ReconstructionReport report;
    ImageGrid f = init;
    f.clear_mask();

    std::vector<std::uint8_t> coverage_mask;
    {
        std::vector<double> coverage(n, 0.0);
        for (std::size_t i = 0; i < n_frames; ++i) {
            std::vector<double> ones(frames[i].size());
            for (std::size_t r = 0; r < ones.size(); ++r) ones[r] = frames[i].valid(r) ? 1.0 : 0.0;
            matrices[i].multiply_transpose_add(ones, {}, coverage);
        }
        std::vector<std::uint8_t> mask(n, 1);
        for (std::size_t k = 0; k < n; ++k)
            if (coverage[k] <= 0.0) {
                mask[k] = 0;
                ++report.uncovered_pixels;
            }
        // Unobserved pixels are filled by the prior and flagged in the output mask.
        if (report.uncovered_pixels > 0) coverage_mask = std::move(mask);
    }

    DataWeights data_weights;
    std::vector<std::vector<double>> wf(n_frames);
    std::vector<std::vector<double>> wd(n_frames);
    std::vector<double> grad(n), dir(n), prev_grad(n), trial(n), trial_grad(n);

    // Objective pieces at the current iterate, given W f in `wf`.
    auto data_value = [&](const std::vector<std::vector<double>>& weights, const std::vector<std::vector<double>>& wfx) {
        double v = 0.0;
        for (std::size_t i = 0; i < n_frames; ++i)
            for (std::size_t r = 0; r < wfx[i].size(); ++r) {
                const double e = wfx[i][r] - frames[i][r];
                v += weights[i][r] * e * e;
            }
        return v;
    };
    auto data_grad_add = [&](const std::vector<std::vector<double>>& weights,
                             const std::vector<std::vector<double>>& wfx, std::vector<double>& g) {
        std::vector<double> res;
        for (std::size_t i = 0; i < n_frames; ++i) {
            res.resize(wfx[i].size());
            for (std::size_t r = 0; r < res.size(); ++r) res[r] = 2.0 * (wfx[i][r] - frames[i][r]);
            matrices[i].multiply_transpose_add(res, weights[i], g);
        }
    };

    for (int outer = 0; outer < opts.max_outer; ++outer) {
        for (std::size_t i = 0; i < n_frames; ++i) {
            wf[i].assign(frames[i].size(), 0.0);
            matrices[i].multiply(f.pixels(), wf[i]);
        }
        if (opts.robust_data_weights) {
            data_weights.assign(n_frames, {});
            for (std::size_t i = 0; i < n_frames; ++i) {
                std::vector<double> res;
                std::vector<std::size_t> idx;
                for (std::size_t r = 0; r < frames[i].size(); ++r)
                    if (matrices[i].row_valid(r) && frames[i].valid(r)) {
                        res.push_back(frames[i][r] - wf[i][r]);
                        idx.push_back(r);
                    }
                data_weights[i].assign(frames[i].size(), 1.0);
                if (res.empty()) continue;
                const auto rw = update_robust_weights(res);
                for (std::size_t k = 0; k < idx.size(); ++k) data_weights[i][idx[k]] = rw[k];
            }
        }
        const auto weights = effective_weights(frames, matrices, opts.robust_data_weights ? &data_weights : nullptr);

        std::fill(grad.begin(), grad.end(), 0.0);
        double value = p.lambda * btv_value_grad_raw(f.pixels(), w, h, p, nullptr, grad);
        for (double& g : grad) g *= p.lambda;
        value += data_value(weights, wf);
        data_grad_add(weights, wf, grad);
        if (!std::isfinite(value)) throw NumericalError("solve_map: non-finite objective");

        report.pass_starts.push_back(report.objective_trace.size());
        report.objective_trace.push_back(value);
        ++report.outer_passes;

        const auto norm = [](const std::vector<double>& v) {
            return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        };
        const double g0 = norm(grad);
        if (g0 == 0.0) break;
        for (std::size_t k = 0; k < n; ++k) dir[k] = -grad[k];
        std::vector<std::vector<double>> wf_trial(n_frames);
        double rel_grad = 1.0;
        int restarts = 0;

        for (int it = 0; it < opts.max_cg; ++it) {
            double slope = std::inner_product(grad.begin(), grad.end(), dir.begin(), 0.0);
            if (slope >= 0.0) {
                for (std::size_t k = 0; k < n; ++k) dir[k] = -grad[k];
                slope = -std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0);
            }
            // Newton step along dir: the data term is quadratic, the prior uses its local curvature.
            double curv = 0.0;
            for (std::size_t i = 0; i < n_frames; ++i) {
                wd[i].assign(frames[i].size(), 0.0);
                matrices[i].multiply(dir, wd[i]);
                for (std::size_t r = 0; r < wd[i].size(); ++r) curv += 2.0 * weights[i][r] * wd[i][r] * wd[i][r];
            }
            if (p.lambda > 0.0) curv += p.lambda * btv_curvature(f.pixels(), dir, w, h, p, nullptr);
            double step = curv > 0.0 ? -slope / curv : 1.0;

            bool accepted = false;
            double trial_value = value;
            for (int bt = 0; bt < 40; ++bt) {
                for (std::size_t k = 0; k < n; ++k) trial[k] = f[k] + step * dir[k];
                for (std::size_t i = 0; i < n_frames; ++i) {
                    wf_trial[i].resize(wf[i].size());
                    for (std::size_t r = 0; r < wf[i].size(); ++r) wf_trial[i][r] = wf[i][r] + step * wd[i][r];
                }
                std::fill(trial_grad.begin(), trial_grad.end(), 0.0);
                trial_value = p.lambda * btv_value_grad_raw(trial, w, h, p, nullptr, trial_grad);
                trial_value += data_value(weights, wf_trial);
                if (std::isfinite(trial_value) && trial_value <= value + 1e-4 * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) {
                // No descent along dir: retry once along steepest descent, then stop.
                if (restarts++ == 0) {
                    for (std::size_t k = 0; k < n; ++k) dir[k] = -grad[k];
                    continue;
                }
                break;
            }
            if (trial_value > value) throw NumericalError("solve_map: objective increased on an accepted step");
            std::copy(trial.begin(), trial.end(), f.data().begin());
            std::swap(wf, wf_trial);
            value = trial_value;
            report.objective_trace.push_back(value);
            ++report.iterations;

            prev_grad.swap(grad);
            for (double& g : trial_grad) g *= p.lambda;
            grad = trial_grad;
            data_grad_add(weights, wf, grad);
            rel_grad = norm(grad) / g0;
            if (rel_grad < opts.grad_tol) break;

            // Polak-Ribiere+ direction update.
            double num = 0.0;
            double den = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                num += grad[k] * (grad[k] - prev_grad[k]);
                den += prev_grad[k] * prev_grad[k];
            }
            const double beta = den > 0.0 ? std::max(0.0, num / den) : 0.0;
            for (std::size_t k = 0; k < n; ++k) dir[k] = -grad[k] + beta * dir[k];
        }
        report.final_relative_gradient = rel_grad;
    }

    report.f_hat = f;
    report.f_hat.set_mask(coverage_mask);
    report.f_hat.spacing = init.spacing;
    report.f_hat.origin_x = init.origin_x;
    report.f_hat.origin_y = init.origin_y;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

ImageGrid bicubic_upsample(const ImageGrid& g, int s) {
    if (s < 1) throw ConfigError("bicubic_upsample: factor must be >= 1");
    if (s == 1) return g;
    ImageGrid out(g.width() * s, g.height() * s);
    for (int y = 0; y < out.height(); ++y) {
        const double sy = (y + 0.5) / s - 0.5;
        for (int x = 0; x < out.width(); ++x) {
            const double sx = (x + 0.5) / s - 0.5;
            out.at(x, y) = *sample_bicubic(g, sx, sy);
        }
    }
    out.spacing = g.spacing / s;
    out.origin_x = g.origin_x - 0.5 * g.spacing + 0.5 * out.spacing;
    out.origin_y = g.origin_y - 0.5 * g.spacing + 0.5 * out.spacing;
    return out;
}

ImageGrid bicubic_rectify(const ImageGrid& frame, const Homography& h, const CameraModel& cam, const HrGridSpec& grid) {
    ImageGrid out = grid.make_image(0.0);
    std::vector<std::uint8_t> mask(out.size(), 0);
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            PixelPoint u;
            try {
                u = forward_map(grid.to_module(x, y), h, cam);
            } catch (const NumericalError&) {
                continue;
            }
            const auto v = sample_bicubic(frame, u.u, u.v);
            if (!v) continue;
            const std::size_t k = out.index(x, y);
            out[k] = *v;
            mask[k] = 1;
        }
    }
    out.set_mask(std::move(mask));
    return out;
}

}  // namespace modsr
