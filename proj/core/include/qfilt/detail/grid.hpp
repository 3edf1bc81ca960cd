#pragma once

// Step-grid conventions shared by every propagator: t_k = k * dt, drive and
// intensities evaluated at the step start, samples taken every `stride` steps
// plus always at the final step.

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace qfilt::detail {

inline std::int64_t step_count(double t_final, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be > 0");
    if (!(t_final >= 0.0)) throw std::invalid_argument("t_final must be >= 0");
    const std::int64_t n = std::llround(t_final / dt);
    if (std::abs(double(n) * dt - t_final) > 1e-9 * std::max(1.0, t_final)) {
        throw std::invalid_argument("t_final must be an integer multiple of dt");
    }
    return n;
}

inline bool is_sample_step(std::int64_t step, std::int64_t n_steps, int stride) {
    return step % stride == 0 || step == n_steps;
}

// Number of samples emitted for (n_steps, stride), including t = 0.
inline std::int64_t sample_count(std::int64_t n_steps, int stride) {
    std::int64_t n = n_steps / stride + 1;
    if (n_steps % stride != 0) ++n;
    return n;
}

// Maps a grid-aligned event time to its step index k (event at t = (k+1) dt).
inline std::int64_t event_step(double t_event, double dt, std::int64_t n_steps) {
    const std::int64_t k = std::llround(t_event / dt) - 1;
    if (k < 0 || k >= n_steps ||
        std::abs(double(k + 1) * dt - t_event) > 1e-9 * std::max(1.0, t_event)) {
        throw std::invalid_argument("record time is not on the step grid");
    }
    return k;
}

}  // namespace qfilt::detail
