#include "rrt/gaussgen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <list>
#include <mutex>

#include <fftw3.h>
#include <fmt/format.h>

namespace rrt {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(void* p) const noexcept { fftw_free(p); }
};

// Per-thread synthesis buffers, grown on demand.
struct SynthesisBuffers {
    std::unique_ptr<fftw_complex[], FftwFree> spectrum;
    std::unique_ptr<double[], FftwFree> signal;
    std::size_t m = 0;

    void ensure(std::size_t size)
    {
        if (size <= m) return;
        spectrum.reset(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (size / 2 + 1))));
        signal.reset(static_cast<double*>(fftw_malloc(sizeof(double) * size)));
        m = size;
    }
};

thread_local SynthesisBuffers tls_buffers;

std::vector<double> circulant_spectrum(std::span<const double> row)
{
    const std::size_t m = row.size();
    std::unique_ptr<double[], FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * m)));
    std::unique_ptr<fftw_complex[], FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (m / 2 + 1))));
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_planner_mutex());
        plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in.get(), out.get(), FFTW_ESTIMATE);
    }
    std::copy(row.begin(), row.end(), in.get());
    fftw_execute(plan);
    std::vector<double> lambda(m);
    for (std::size_t j = 0; j <= m / 2; ++j) lambda[j] = out[j][0];
    for (std::size_t j = m / 2 + 1; j < m; ++j) lambda[j] = lambda[m - j];
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    return lambda;
}

} // namespace

namespace detail {

class InverseRealFft {
public:
    explicit InverseRealFft(std::size_t m) : m_(m)
    {
        tls_buffers.ensure(m);
        std::lock_guard lock(fftw_planner_mutex());
        plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(m), tls_buffers.spectrum.get(),
                                     tls_buffers.signal.get(), FFTW_ESTIMATE);
    }
    ~InverseRealFft()
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(plan_);
    }
    InverseRealFft(const InverseRealFft&) = delete;
    InverseRealFft& operator=(const InverseRealFft&) = delete;

    std::size_t size() const noexcept { return m_; }
    void execute(fftw_complex* in, double* out) const { fftw_execute_dft_c2r(plan_, in, out); }

private:
    std::size_t m_;
    fftw_plan plan_;
};

} // namespace detail

void GridSpec::validate() const
{
    if (!(step > 0.0) || !std::isfinite(step))
        throw DomainError(fmt::format("grid step must be positive, got {}", step));
    if (n_points < 2) throw DomainError("grid needs at least 2 points");
}

GridSpec GridSpec::covering(double length, double step)
{
    if (!(length > 0.0) || !(step > 0.0)) throw DomainError("grid length and step must be positive");
    const auto n = static_cast<std::size_t>(std::floor(length / step + 1e-9));
    return GridSpec{step, std::max<std::size_t>(n, 1) + 1, 0.0};
}

double fgn_autocovariance(double hurst, std::size_t k, double step)
{
    const double h2 = 2.0 * hurst;
    const double kk = static_cast<double>(k);
    const double up = std::pow(kk + 1.0, h2);
    const double mid = k == 0 ? 0.0 : std::pow(kk, h2);
    const double down = k == 0 ? 1.0 : std::pow(kk - 1.0, h2);  // |k-1| at k = 0 is 1
    return std::pow(step, h2) * (up - 2.0 * mid + down) / 2.0;
}

std::vector<double> increment_autocovariance(const VarianceSpec& spec, std::size_t n, double step)
{
    std::vector<double> s2(n + 1);
    for (std::size_t k = 0; k <= n; ++k) s2[k] = spec.sigma2(static_cast<double>(k) * step);
    std::vector<double> gamma(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double down = k == 0 ? s2[1] : s2[k - 1];
        gamma[k] = (s2[k + 1] - 2.0 * s2[k] + down) / 2.0;
    }
    return gamma;
}

EmbeddingPlan plan_circulant(std::span<const double> autocov, double step)
{
    const std::size_t n = autocov.size();
    if (n == 0) throw DomainError("plan_circulant: empty autocovariance");
    EmbeddingPlan plan;
    plan.n_increments = n;
    plan.step = step;

    const bool uncorrelated =
        std::all_of(autocov.begin() + 1, autocov.end(), [](double g) { return g == 0.0; });
    if (n == 1 || uncorrelated) {
        // white noise: the circulant is gamma(0) * I
        plan.white_noise = true;
        plan.valid = autocov[0] > 0.0;
        plan.eigenvalues.assign(n == 1 ? 1 : 2 * (n - 1), autocov[0]);
        return plan;
    }

    const std::size_t m = 2 * (n - 1);
    std::vector<double> row(m);
    for (std::size_t j = 0; j < n; ++j) row[j] = autocov[j];
    for (std::size_t j = 1; j + 1 < n; ++j) row[m - j] = autocov[j];
    plan.eigenvalues = circulant_spectrum(row);

    const double lmax = *std::max_element(plan.eigenvalues.begin(), plan.eigenvalues.end());
    const double tol = 1e-9 * lmax;
    plan.most_negative = *std::min_element(plan.eigenvalues.begin(), plan.eigenvalues.end());
    plan.valid = lmax > 0.0 && plan.most_negative >= -tol;
    for (auto& l : plan.eigenvalues) {
        if (l < 0.0) {
            l = 0.0;
            ++plan.clipped;
        }
    }

    plan.amplitude.resize(m / 2 + 1);
    const double md = static_cast<double>(m);
    plan.amplitude[0] = std::sqrt(plan.eigenvalues[0] / md);
    plan.amplitude[m / 2] = std::sqrt(plan.eigenvalues[m / 2] / md);
    for (std::size_t j = 1; j < m / 2; ++j) plan.amplitude[j] = std::sqrt(plan.eigenvalues[j] / (2.0 * md));
    plan.fft = std::make_shared<detail::InverseRealFft>(m);
    return plan;
}

EmbeddingPlan plan_circulant(double hurst, const GridSpec& grid)
{
    grid.validate();
    if (!(hurst > 0.0 && hurst <= 1.0)) throw DomainError("hurst index must lie in (0, 1]");
    const std::size_t n = grid.n_increments();
    std::vector<double> gamma(n);
    for (std::size_t k = 0; k < n; ++k) gamma[k] = fgn_autocovariance(hurst, k, grid.step);
    auto plan = plan_circulant(gamma, grid.step);
    plan.hurst = hurst;
    return plan;
}

void sample_fbm_into(const EmbeddingPlan& plan, RngStream& rng, std::span<double> out, double scale)
{
    const std::size_t n = plan.n_increments;
    if (out.size() != n + 1) throw DomainError("sample_fbm_into: output size must be n_increments + 1");
    if (!plan.valid) throw NumericalError("sample_fbm_into: embedding plan is not valid");
    out[0] = 0.0;
    if (plan.white_noise) {
        const double sd = scale * std::sqrt(plan.eigenvalues[0]);
        double acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            acc += sd * rng.normal();
            out[k + 1] = acc;
        }
        return;
    }
    const std::size_t m = plan.fft->size();
    tls_buffers.ensure(m);
    fftw_complex* spec = tls_buffers.spectrum.get();
    double* sig = tls_buffers.signal.get();
    spec[0][0] = plan.amplitude[0] * rng.normal();
    spec[0][1] = 0.0;
    for (std::size_t j = 1; j < m / 2; ++j) {
        spec[j][0] = plan.amplitude[j] * rng.normal();
        spec[j][1] = plan.amplitude[j] * rng.normal();
    }
    spec[m / 2][0] = plan.amplitude[m / 2] * rng.normal();
    spec[m / 2][1] = 0.0;
    plan.fft->execute(spec, sig);
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        acc += scale * sig[k];
        out[k + 1] = acc;
    }
}

PathSample sample_fbm(const EmbeddingPlan& plan, RngStream& rng)
{
    PathSample p{GridSpec{plan.step, plan.n_increments + 1}, std::vector<double>(plan.n_increments + 1),
                 fmt::format("fbm-circulant(H={})", plan.hurst), rng.root(), rng.experiment(),
                 rng.replica()};
    sample_fbm_into(plan, rng, p.values);
    return p;
}

IncrementFactor IncrementFactor::build(std::span<const double> autocov, double step)
{
    IncrementFactor f;
    f.n_ = autocov.size();
    f.step_ = step;
    const std::size_t n = f.n_;
    f.lower_.assign(n * (n + 1) / 2, 0.0);
    auto L = [&](std::size_t i, std::size_t j) -> double& { return f.lower_[i * (i + 1) / 2 + j]; };
    const double floor = 1e-13 * autocov[0];
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = autocov[i - j];
            const double* li = &f.lower_[i * (i + 1) / 2];
            const double* lj = &f.lower_[j * (j + 1) / 2];
            for (std::size_t k = 0; k < j; ++k) s -= li[k] * lj[k];
            if (i == j) {
                if (!(s > floor))
                    throw FactorizationError(
                        i + 1, fmt::format("increment covariance is not positive definite: leading "
                                           "minor of order {} of {} fails (pivot {}); try a larger "
                                           "grid step",
                                           i + 1, n, s));
                L(i, i) = std::sqrt(s);
            } else {
                L(i, j) = s / L(j, j);
            }
        }
    }
    return f;
}

IncrementFactor IncrementFactor::build(const VarianceSpec& spec, const GridSpec& grid)
{
    grid.validate();
    const auto gamma = increment_autocovariance(spec, grid.n_increments(), grid.step);
    return build(gamma, grid.step);
}

void IncrementFactor::sample_into(RngStream& rng, std::span<double> out) const
{
    if (out.size() != n_ + 1) throw DomainError("IncrementFactor: output size must be n + 1");
    thread_local std::vector<double> z;
    z.resize(n_);
    for (auto& v : z) v = rng.normal();
    out[0] = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        const double* li = &lower_[i * (i + 1) / 2];
        double inc = 0.0;
        for (std::size_t k = 0; k <= i; ++k) inc += li[k] * z[k];
        acc += inc;
        out[i + 1] = acc;
    }
}

std::shared_ptr<const IncrementFactor> cached_factor(const VarianceSpec& spec, const GridSpec& grid)
{
    struct Entry {
        std::string key;
        std::shared_ptr<const IncrementFactor> factor;
    };
    static std::mutex mtx;
    static std::list<Entry> cache;
    constexpr std::size_t kMaxEntries = 8;

    grid.validate();
    const std::string key = fmt::format("{}|{:a}|{}", spec.to_json().dump(), grid.step, grid.n_points);
    {
        std::lock_guard lock(mtx);
        for (auto it = cache.begin(); it != cache.end(); ++it) {
            if (it->key == key) {
                cache.splice(cache.begin(), cache, it);
                return cache.front().factor;
            }
        }
    }
    auto factor = std::make_shared<const IncrementFactor>(IncrementFactor::build(spec, grid));
    std::lock_guard lock(mtx);
    cache.push_front({key, factor});
    if (cache.size() > kMaxEntries) cache.pop_back();
    return factor;
}

PathSample sample_general(const VarianceSpec& spec, const GridSpec& grid, RngStream& rng)
{
    auto factor = cached_factor(spec, grid);
    PathSample p{grid, std::vector<double>(grid.n_points), "cholesky(" + spec.describe() + ")",
                 rng.root(), rng.experiment(), rng.replica()};
    factor->sample_into(rng, p.values);
    return p;
}

PathGenerator PathGenerator::for_fbm(double hurst, const GridSpec& grid, double variance_scale,
                                     GeneratorChoice choice)
{
    grid.validate();
    PathGenerator g;
    g.grid_ = grid;
    if (hurst == 0.5 && choice != GeneratorChoice::Cholesky) {
        g.impl_ = WhiteNoise{std::sqrt(variance_scale * grid.step)};
        g.id_ = "iid-increments";
        return g;
    }
    if (choice != GeneratorChoice::Cholesky) {
        auto plan = plan_circulant(hurst, grid);
        if (plan.valid) {
            g.id_ = fmt::format("fbm-circulant(H={})", hurst);
            g.impl_ = Circulant{std::move(plan), std::sqrt(variance_scale)};
            return g;
        }
        if (choice == GeneratorChoice::Circulant)
            throw NumericalError(fmt::format("circulant embedding invalid for H = {} (min eigenvalue {})",
                                             hurst, plan.most_negative));
    }
    std::vector<double> gamma(grid.n_increments());
    for (std::size_t k = 0; k < gamma.size(); ++k)
        gamma[k] = variance_scale * fgn_autocovariance(hurst, k, grid.step);
    g.impl_ = Cholesky{std::make_shared<const IncrementFactor>(IncrementFactor::build(gamma, grid.step))};
    g.id_ = fmt::format("fbm-cholesky(H={})", hurst);
    return g;
}

PathGenerator PathGenerator::for_spec(const VarianceSpec& spec, const GridSpec& grid,
                                      GeneratorChoice choice)
{
    grid.validate();
    if (grid.span() > spec.domain_max())
        throw DomainError(fmt::format("grid span {} exceeds variance domain {}", grid.span(),
                                      spec.domain_max()));
    if (choice == GeneratorChoice::Cholesky) {
        PathGenerator g;
        g.grid_ = grid;
        g.impl_ = Cholesky{cached_factor(spec, grid)};
        g.id_ = "cholesky(" + spec.describe() + ")";
        return g;
    }
    if (auto p = spec.as_single_power()) return for_fbm(p->two_alpha / 2.0, grid, p->a, choice);

    PathGenerator g;
    g.grid_ = grid;
    const auto gamma = increment_autocovariance(spec, grid.n_increments(), grid.step);
    auto plan = plan_circulant(gamma, grid.step);
    if (plan.valid) {
        g.impl_ = Circulant{std::move(plan), 1.0};
        g.id_ = "circulant(" + spec.describe() + ")";
        return g;
    }
    if (choice == GeneratorChoice::Circulant)
        throw NumericalError("circulant embedding invalid for " + spec.describe());
    g.impl_ = Cholesky{cached_factor(spec, grid)};
    g.id_ = "cholesky(" + spec.describe() + ")";
    return g;
}

void PathGenerator::generate(RngStream& rng, std::span<double> out) const
{
    if (out.size() != grid_.n_points) throw DomainError("PathGenerator: output size must equal n_points");
    std::visit(
        [&](const auto& impl) {
            using T = std::decay_t<decltype(impl)>;
            if constexpr (std::is_same_v<T, WhiteNoise>) {
                out[0] = 0.0;
                double acc = 0.0;
                for (std::size_t k = 1; k < out.size(); ++k) {
                    acc += impl.sd * rng.normal();
                    out[k] = acc;
                }
            } else if constexpr (std::is_same_v<T, Circulant>) {
                sample_fbm_into(impl.plan, rng, out, impl.scale);
            } else {
                impl.factor->sample_into(rng, out);
            }
        },
        impl_);
}

PathSample PathGenerator::sample(RngStream& rng) const
{
    PathSample p{grid_, std::vector<double>(grid_.n_points), id_, rng.root(), rng.experiment(),
                 rng.replica()};
    generate(rng, p.values);
    return p;
}

void write_path_dump(const std::string& stem, std::span<const PathSample> paths)
{
    if (paths.empty()) throw DomainError("write_path_dump: no paths");
    const auto& grid = paths.front().grid;
    std::ofstream bin(stem + ".bin", std::ios::binary);
    if (!bin) throw ConfigError("cannot write '" + stem + ".bin'");
    nlohmann::json meta{{"dtype", "float64-le"},
                        {"layout", "column-major: one path per column"},
                        {"n_points", grid.n_points},
                        {"n_paths", paths.size()},
                        {"step", grid.step},
                        {"origin", grid.origin}};
    auto& cols = meta["paths"] = nlohmann::json::array();
    for (const auto& p : paths) {
        if (p.values.size() != grid.n_points) throw DomainError("write_path_dump: ragged paths");
        for (double v : p.values) {
            auto bits = std::bit_cast<std::uint64_t>(v);
            if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
            bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
        }
        cols.push_back({{"generator", p.generator},
                        {"seed", {{"root", p.seed_root}, {"experiment", p.seed_experiment},
                                  {"replica", p.seed_replica}}}});
    }
    std::ofstream js(stem + ".json");
    if (!js) throw ConfigError("cannot write '" + stem + ".json'");
    js << meta.dump(2) << '\n';
}

} // namespace rrt
