#ifndef PFALAB_AUGMENT_HPP
#define PFALAB_AUGMENT_HPP

#include <cmath>
#include <cstddef>
#include <vector>

#include "pfalab/dataset.hpp"
#include "pfalab/rng.hpp"

namespace pfalab {

// Vector-space analogs of the weak/strong augmentation pair: additive noise
// stands in for flip/crop, scale jitter + a contiguous zero block stand in
// for RandAugment followed by Cutout.
struct AugmentConfig {
    double weak_sigma = 0.1;
    double strong_sigma = 0.6;
    double mask_frac = 0.25;    // fraction of coordinates zeroed, contiguous
    double scale_jitter = 0.25; // per-coordinate scale in [1-g, 1+g]

    void validate() const {
        if (weak_sigma < 0.0 || strong_sigma < 0.0)
            throw ConfigError("augment sigmas must be non-negative");
        if (weak_sigma >= strong_sigma)
            throw ConfigError("weak_sigma must be smaller than strong_sigma");
        if (mask_frac < 0.0 || mask_frac > 0.5)
            throw ConfigError("mask_frac must lie in [0, 0.5]");
        if (scale_jitter < 0.0 || scale_jitter > 0.5)
            throw ConfigError("scale_jitter must lie in [0, 0.5]");
    }
};

// A0: x + gaussian noise
inline void weak_augment(const double* x, double* out, std::size_t d,
                         const AugmentConfig& cfg, Rng& rng) {
    for (std::size_t j = 0; j < d; ++j) out[j] = x[j] + cfg.weak_sigma * rng.normal();
}

// A1: per-coordinate scale jitter, gaussian noise, then a contiguous zero
// block of floor(mask_frac * d) coordinates.
inline void strong_augment(const double* x, double* out, std::size_t d,
                           const AugmentConfig& cfg, Rng& rng) {
    for (std::size_t j = 0; j < d; ++j) {
        const double s = rng.uniform(1.0 - cfg.scale_jitter, 1.0 + cfg.scale_jitter);
        out[j] = s * x[j] + cfg.strong_sigma * rng.normal();
    }
    const std::size_t block = static_cast<std::size_t>(cfg.mask_frac * d);
    if (block > 0) {
        const std::size_t start = rng.uniform_int(d - block + 1);
        for (std::size_t j = start; j < start + block; ++j) out[j] = 0.0;
    }
}

inline std::vector<double> weak_augment(const std::vector<double>& x,
                                        const AugmentConfig& cfg, Rng& rng) {
    std::vector<double> out(x.size());
    weak_augment(x.data(), out.data(), x.size(), cfg, rng);
    return out;
}

inline std::vector<double> strong_augment(const std::vector<double>& x,
                                          const AugmentConfig& cfg, Rng& rng) {
    std::vector<double> out(x.size());
    strong_augment(x.data(), out.data(), x.size(), cfg, rng);
    return out;
}

inline Matrix weak_augment_rows(const Matrix& x, const std::vector<std::size_t>& rows,
                                const AugmentConfig& cfg, Rng& rng) {
    Matrix out(rows.size(), x.d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        weak_augment(x.row(rows[i]), out.row(i), x.d, cfg, rng);
    return out;
}

inline Matrix strong_augment_rows(const Matrix& x, const std::vector<std::size_t>& rows,
                                  const AugmentConfig& cfg, Rng& rng) {
    Matrix out(rows.size(), x.d);
    for (std::size_t i = 0; i < rows.size(); ++i)
        strong_augment(x.row(rows[i]), out.row(i), x.d, cfg, rng);
    return out;
}

}  // namespace pfalab

#endif
