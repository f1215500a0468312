#pragma once
//
// Exact simulation of centred Gaussian processes with stationary increments
// on uniform grids.
//
//   * circulant embedding (Davies-Harte) of the increment autocovariance,
//     used for fractional Brownian motion and any spec whose embedding is
//     nonnegative definite;
//   * Cholesky factorisation of the Toeplitz increment covariance for
//     general variance functions;
//   * i.i.d. increments when sigma^2 is linear.
//
// Paths always start at X(0) = 0 at grid index 0.
//

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "rrt/errors.hpp"
#include "rrt/model.hpp"
#include "rrt/rng.hpp"

namespace rrt {

struct GridSpec {
    double step;             // delta > 0
    std::size_t n_points;    // >= 2
    double origin = 0.0;

    void validate() const;
    double time(std::size_t k) const noexcept { return origin + static_cast<double>(k) * step; }
    double span() const noexcept { return static_cast<double>(n_points - 1) * step; }
    std::size_t n_increments() const noexcept { return n_points - 1; }

    // Grid with step `step` covering [0, length] (length rounded down to the grid).
    static GridSpec covering(double length, double step);
};

// Cov(B_H((k+1) delta) - B_H(k delta), B_H(delta) - B_H(0))
double fgn_autocovariance(double hurst, std::size_t k, double step);

// Increment autocovariance of a stationary-increment process with variance spec.
std::vector<double> increment_autocovariance(const VarianceSpec& spec, std::size_t n, double step);

namespace detail {
class InverseRealFft;
}

struct EmbeddingPlan {
    double hurst = 0.0;         // 0 for plans built from a generic autocovariance
    std::size_t n_increments = 0;
    double step = 0.0;
    std::vector<double> eigenvalues;   // circulant spectrum, length 2(n-1)
    std::size_t clipped = 0;           // eigenvalues raised to 0
    double most_negative = 0.0;        // smallest eigenvalue before clipping
    bool valid = false;
    bool white_noise = false;

    // per-frequency amplitudes for the Hermitian synthesis, length M/2 + 1
    std::vector<double> amplitude;
    std::shared_ptr<const detail::InverseRealFft> fft;
};

EmbeddingPlan plan_circulant(double hurst, const GridSpec& grid);
EmbeddingPlan plan_circulant(std::span<const double> autocov, double step);

struct PathSample {
    GridSpec grid;
    std::vector<double> values;
    std::string generator;
    std::uint64_t seed_root = 0;
    std::uint64_t seed_experiment = 0;
    std::uint64_t seed_replica = 0;
};

// Writes n_increments + 1 levels into out, out[0] = 0.
void sample_fbm_into(const EmbeddingPlan& plan, RngStream& rng, std::span<double> out,
                     double scale = 1.0);
PathSample sample_fbm(const EmbeddingPlan& plan, RngStream& rng);

class FactorizationError : public NumericalError {
public:
    FactorizationError(std::size_t minor, const std::string& what)
        : NumericalError(what), minor_(minor) {}
    std::size_t leading_minor() const noexcept { return minor_; }

private:
    std::size_t minor_;
};

// Lower-triangular factor of the Toeplitz increment covariance, packed row-wise.
class IncrementFactor {
public:
    static IncrementFactor build(std::span<const double> autocov, double step);
    static IncrementFactor build(const VarianceSpec& spec, const GridSpec& grid);

    std::size_t n() const noexcept { return n_; }
    double step() const noexcept { return step_; }
    void sample_into(RngStream& rng, std::span<double> out) const;

private:
    std::size_t n_ = 0;
    double step_ = 0.0;
    std::vector<double> lower_;
};

// Cholesky sampler with a process-wide factor cache keyed by (spec, grid).
PathSample sample_general(const VarianceSpec& spec, const GridSpec& grid, RngStream& rng);
std::shared_ptr<const IncrementFactor> cached_factor(const VarianceSpec& spec, const GridSpec& grid);

enum class GeneratorChoice { Auto, Circulant, Cholesky };

// Immutable, shareable path generator for one (law, grid) pair.
class PathGenerator {
public:
    struct WhiteNoise { double sd; };
    struct Circulant { EmbeddingPlan plan; double scale; };
    struct Cholesky { std::shared_ptr<const IncrementFactor> factor; };

    static PathGenerator for_spec(const VarianceSpec& spec, const GridSpec& grid,
                                  GeneratorChoice choice = GeneratorChoice::Auto);
    static PathGenerator for_fbm(double hurst, const GridSpec& grid, double variance_scale = 1.0,
                                 GeneratorChoice choice = GeneratorChoice::Auto);

    const GridSpec& grid() const noexcept { return grid_; }
    const std::string& id() const noexcept { return id_; }

    void generate(RngStream& rng, std::span<double> out) const;
    PathSample sample(RngStream& rng) const;

private:
    GridSpec grid_{1.0, 2};
    std::string id_;
    std::variant<WhiteNoise, Circulant, Cholesky> impl_;
};

// Path dump: <stem>.bin holds little-endian float64 columns, one path per
// column stored contiguously; <stem>.json carries grid and seed metadata.
void write_path_dump(const std::string& stem, std::span<const PathSample> paths);

} // namespace rrt
