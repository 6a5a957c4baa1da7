#include "agb/waveform.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "agb/random.hpp"

namespace agb {
namespace {

constexpr double kSqrt2Pi = 2.5066282746310002;
constexpr double kPulseReach = 8.0;             // pulse truncation, in pulse sigmas
constexpr double kFootprintReach = 3.0;         // footprint truncation, in footprint sigmas
constexpr double kNoiseFreeThreshold = 1e-9;    // relative to the peak amplitude
constexpr double kPeakSignificance = 0.02;      // local maxima below this fraction of the peak are ignored
constexpr double kGroundMinEnergy = 0.01;       // minimum energy fraction for a ground component
constexpr double kDetection90 = 5.0 + 1.2815515655446004;  // threshold plus the 90% normal quantile
constexpr double kSaturationLimit = 1.0 - 1e-6;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

std::vector<double> smooth(const std::vector<double>& values, double sigma_bins) {
    const auto half = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma_bins));
    std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
    double total = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
        const double u = static_cast<double>(k) / sigma_bins;
        kernel[static_cast<std::size_t>(k + half)] = std::exp(-0.5 * u * u);
        total += kernel[static_cast<std::size_t>(k + half)];
    }
    for (auto& k : kernel) k /= total;

    const auto n = static_cast<std::ptrdiff_t>(values.size());
    std::vector<double> out(values.size(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::ptrdiff_t k = -half; k <= half; ++k) {
            const auto j = i + k;
            if (j >= 0 && j < n) sum += kernel[static_cast<std::size_t>(k + half)] * values[static_cast<std::size_t>(j)];
        }
        out[static_cast<std::size_t>(i)] = sum;
    }
    return out;
}

std::vector<double> smoothed(const Waveform& wf) { return smooth(wf.amplitude, wf.pulse_sigma / wf.bin); }

// Indices of significant local maxima of a smoothed profile, highest elevation first.
std::vector<std::size_t> local_maxima(const std::vector<double>& s, double floor) {
    std::vector<std::size_t> peaks;
    const std::size_t n = s.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (s[i] <= floor) continue;
        const double up = i > 0 ? s[i - 1] : 0.0;
        const double down = i + 1 < n ? s[i + 1] : 0.0;
        if (s[i] > up && s[i] >= down) peaks.push_back(i);
    }
    return peaks;
}

double significance_floor(const std::vector<double>& s, const Waveform& wf) {
    const double peak = *std::max_element(s.begin(), s.end());
    return std::max(kPeakSignificance * peak, wf.threshold);
}

// Sub-bin peak position by parabolic interpolation, in fractional index units.
double refine_peak(const std::vector<double>& s, std::size_t i) {
    if (i == 0 || i + 1 >= s.size()) return static_cast<double>(i);
    const double denom = s[i - 1] - 2.0 * s[i] + s[i + 1];
    if (denom >= 0.0) return static_cast<double>(i);
    return static_cast<double>(i) + 0.5 * (s[i - 1] - s[i + 1]) / denom;
}

double second_difference(const std::vector<double>& s, std::size_t i) {
    if (i == 0 || i + 1 >= s.size()) return 0.0;
    return s[i - 1] - 2.0 * s[i] + s[i + 1];
}

double crossing(double a, double b) { return a == b ? 0.0 : a / (a - b); }

std::vector<double> component_profile(const Waveform& wf, const GaussianComponent& c) {
    std::vector<double> out(wf.size());
    for (std::size_t i = 0; i < wf.size(); ++i) out[i] = c.at(wf.elevation(i));
    return out;
}

// Energy in bins below `ground`, with the bin containing it split linearly.
double energy_below(const Waveform& wf, double ground) {
    double sum = 0.0;
    for (std::size_t i = 0; i < wf.size(); ++i) {
        const double lo = wf.elevation(i) - wf.bin / 2.0;
        const double hi = wf.elevation(i) + wf.bin / 2.0;
        if (hi <= ground) {
            sum += wf.amplitude[i];
        } else if (lo < ground) {
            sum += wf.amplitude[i] * (ground - lo) / wf.bin;
        }
    }
    return sum;
}

// Cover when `ground` of the `total` energy is attributed to the ground.
double cover_from_ground(double ground, double total, double rho_v, double rho_g) {
    ground = std::clamp(ground, 0.0, total);
    return cover_fraction(total - ground, ground, rho_v, rho_g);
}

}  // namespace

double FootprintConfig::pulse_sigma() const { return pulse_fwhm / (2.0 * std::sqrt(2.0 * std::numbers::ln2)); }

void FootprintConfig::validate() const {
    if (!(diameter > 0.0)) throw ConfigError("footprint diameter must be positive");
    if (!(sigma() > 0.0)) throw ConfigError("footprint sigma must be positive");
    if (!(pulse_fwhm > 0.0)) throw ConfigError("pulse FWHM must be positive");
    if (!(bin > 0.0)) throw ConfigError("bin size must be positive");
    if (!(noise_sd >= 0.0)) throw ConfigError("noise stddev must be non-negative");
    if (!(rho_v > 0.0 && rho_v <= 1.0) || !(rho_g > 0.0 && rho_g <= 1.0)) {
        throw ConfigError("reflectances must lie in (0, 1]");
    }
}

double Waveform::total_energy() const {
    double sum = 0.0;
    for (double a : amplitude) sum += a;
    return sum;
}

double GaussianComponent::energy(double bin) const { return amplitude * sigma * kSqrt2Pi / bin; }

double GaussianComponent::at(double elevation) const {
    const double u = (elevation - mean) / sigma;
    return amplitude * std::exp(-0.5 * u * u);
}

double footprint_weight(const PointRecord& p, const FootprintConfig& config) {
    const double sigma = config.sigma();
    const double dx = p.x - config.center_x, dy = p.y - config.center_y;
    const double r2 = dx * dx + dy * dy;
    if (r2 > kFootprintReach * kFootprintReach * sigma * sigma) return 0.0;
    const double reflectance = p.classification == kClassGround ? config.rho_g : config.rho_v;
    return reflectance * std::exp(-r2 / (2.0 * sigma * sigma));
}

Waveform simulate_footprint(const PointCloud& cloud, const FootprintConfig& config) {
    config.validate();
    struct Hit {
        double z, weight;
        bool ground;
    };
    std::vector<Hit> hits;
    for (const auto& p : cloud.points) {
        const double w = footprint_weight(p, config);
        if (w > 0.0) hits.push_back({p.z, w, p.classification == kClassGround});
    }
    if (hits.empty()) {
        throw WaveformError(WaveformErrorKind::empty_footprint,
                            "no points within the footprint of " +
                                (config.wave_id.empty() ? std::string("waveform") : config.wave_id));
    }

    const double sp = config.pulse_sigma();
    const double bin = config.bin;
    double zmin = hits[0].z, zmax = hits[0].z;
    for (const auto& h : hits) {
        zmin = std::min(zmin, h.z);
        zmax = std::max(zmax, h.z);
    }
    // Bin centres on a fixed lattice of the bin size.
    const double top = std::ceil((zmax + kPulseReach * sp) / bin) * bin;
    const double bottom = std::floor((zmin - kPulseReach * sp) / bin) * bin;
    const auto count = static_cast<std::size_t>(std::llround((top - bottom) / bin)) + 1;

    Waveform wf;
    wf.wave_id = config.wave_id;
    wf.center_x = config.center_x;
    wf.center_y = config.center_y;
    wf.top = top;
    wf.bin = bin;
    wf.pulse_sigma = sp;
    wf.noise_sd = config.noise_sd;
    wf.amplitude.assign(count, 0.0);
    wf.ground_amplitude.assign(count, 0.0);

    const auto reach = static_cast<std::ptrdiff_t>(std::ceil(kPulseReach * sp / bin)) + 1;
    for (const auto& h : hits) {
        const auto centre = static_cast<std::ptrdiff_t>(std::llround((top - h.z) / bin));
        const auto first = std::max<std::ptrdiff_t>(0, centre - reach);
        const auto last = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(count) - 1, centre + reach);
        for (auto i = first; i <= last; ++i) {
            const double e = top - static_cast<double>(i) * bin;
            const double share =
                normal_cdf((e + bin / 2.0 - h.z) / sp) - normal_cdf((e - bin / 2.0 - h.z) / sp);
            const double energy = h.weight * share;
            wf.amplitude[static_cast<std::size_t>(i)] += energy;
            if (h.ground) wf.ground_amplitude[static_cast<std::size_t>(i)] += energy;
        }
    }

    const double peak = *std::max_element(wf.amplitude.begin(), wf.amplitude.end());
    if (config.noise_sd > 0.0) {
        Rng rng(config.seed);
        for (auto& a : wf.amplitude) a += rng.normal(0.0, config.noise_sd);
        wf.threshold = 5.0 * config.noise_sd;
        for (auto& a : wf.amplitude) {
            if (a <= wf.threshold) a = 0.0;
        }
    } else {
        wf.threshold = kNoiseFreeThreshold * peak;
    }
    return wf;
}

std::vector<GaussianComponent> decompose(const Waveform& wf, std::size_t max_components) {
    if (wf.size() < 3 || !(wf.pulse_sigma > 0.0)) {
        throw WaveformError(WaveformErrorKind::no_signal, "waveform too short to decompose");
    }
    const auto s = smoothed(wf);
    const double floor = significance_floor(s, wf);
    auto peaks = local_maxima(s, floor);
    if (peaks.empty() || !(floor > 0.0)) {
        throw WaveformError(WaveformErrorKind::no_signal, "no decomposable component above noise");
    }
    std::stable_sort(peaks.begin(), peaks.end(), [&](std::size_t a, std::size_t b) { return s[a] > s[b]; });
    if (peaks.size() > max_components) peaks.resize(max_components);

    const double sp = wf.pulse_sigma;
    const double smooth_sigma = sp;
    const double min_sigma = 0.9 * sp;
    const double max_sigma = 0.5 * static_cast<double>(wf.size()) * wf.bin;
    const double lowest = wf.elevation(wf.size() - 1);

    std::vector<GaussianComponent> comps;
    for (auto i : peaks) {
        // Half-width at half maximum of the smoothed peak, walking both ways.
        std::size_t up = i, down = i;
        while (up > 0 && s[up] > 0.5 * s[i]) --up;
        while (down + 1 < s.size() && s[down] > 0.5 * s[i]) ++down;
        const double hwhm = 0.5 * static_cast<double>(down - up) * wf.bin;
        const double observed = hwhm / std::sqrt(2.0 * std::numbers::ln2);
        const double width = std::sqrt(std::max(observed * observed - smooth_sigma * smooth_sigma, min_sigma * min_sigma));
        const double mean = wf.top - refine_peak(s, i) * wf.bin;
        comps.push_back({std::max(wf.amplitude[i], s[i]), mean, std::min(width, max_sigma)});
    }

    // Joint bounded Levenberg-Marquardt refinement over all bins.
    const auto k = static_cast<Eigen::Index>(comps.size());
    const auto n = static_cast<Eigen::Index>(wf.size());
    Eigen::VectorXd theta(3 * k);
    for (Eigen::Index c = 0; c < k; ++c) {
        theta(3 * c) = comps[static_cast<std::size_t>(c)].amplitude;
        theta(3 * c + 1) = comps[static_cast<std::size_t>(c)].mean;
        theta(3 * c + 2) = comps[static_cast<std::size_t>(c)].sigma;
    }
    auto project = [&](Eigen::VectorXd& t) {
        for (Eigen::Index c = 0; c < k; ++c) {
            t(3 * c) = std::max(0.0, t(3 * c));
            t(3 * c + 1) = std::clamp(t(3 * c + 1), lowest, wf.top);
            t(3 * c + 2) = std::clamp(t(3 * c + 2), min_sigma, max_sigma);
        }
    };
    auto residuals = [&](const Eigen::VectorXd& t, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(n);
        if (jac) jac->setZero(n, 3 * k);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = wf.elevation(static_cast<std::size_t>(i));
            double model = 0.0;
            for (Eigen::Index c = 0; c < k; ++c) {
                const double a = t(3 * c), mu = t(3 * c + 1), sg = t(3 * c + 2);
                const double u = (e - mu) / sg;
                const double g = std::exp(-0.5 * u * u);
                model += a * g;
                if (jac) {
                    (*jac)(i, 3 * c) = g;
                    (*jac)(i, 3 * c + 1) = a * g * u / sg;
                    (*jac)(i, 3 * c + 2) = a * g * u * u / sg;
                }
            }
            r(i) = model - wf.amplitude[static_cast<std::size_t>(i)];
        }
    };

    project(theta);
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    residuals(theta, r, &jac);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    for (int iter = 0; iter < 300; ++iter) {
        const Eigen::MatrixXd h = jac.transpose() * jac;
        const Eigen::VectorXd g = jac.transpose() * r;
        bool improved = false;
        while (lambda < 1e12) {
            Eigen::MatrixXd damped = h;
            for (Eigen::Index d = 0; d < damped.rows(); ++d) damped(d, d) += lambda * std::max(h(d, d), 1e-300);
            Eigen::VectorXd trial = theta - damped.ldlt().solve(g);
            project(trial);
            Eigen::VectorXd r_trial;
            residuals(trial, r_trial, nullptr);
            const double trial_cost = r_trial.squaredNorm();
            if (std::isfinite(trial_cost) && trial_cost < cost) {
                const double gain = (cost - trial_cost) / std::max(cost, 1e-300);
                theta = trial;
                cost = trial_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                improved = true;
                residuals(theta, r, &jac);
                if (gain < 1e-12) iter = 1 << 20;
                break;
            }
            lambda *= 4.0;
        }
        if (!improved) break;
    }

    const double total = wf.total_energy();
    comps.clear();
    for (Eigen::Index c = 0; c < k; ++c) {
        GaussianComponent comp{theta(3 * c), theta(3 * c + 1), theta(3 * c + 2)};
        if (comp.amplitude > 0.0 && comp.energy(wf.bin) >= 1e-4 * total) comps.push_back(comp);
    }
    if (comps.empty()) throw WaveformError(WaveformErrorKind::no_signal, "decomposition produced no component");
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.mean < b.mean; });
    return comps;
}

GroundEstimate find_ground(const Waveform& wf) {
    if (wf.annotated()) {
        double ground = 0.0;
        for (double a : wf.ground_amplitude) ground += a;
        if (!(ground > 0.0)) {
            throw WaveformError(WaveformErrorKind::no_ground, "waveform " + wf.wave_id + " has no ground return");
        }
    }
    GroundEstimate est;
    est.components = decompose(wf);
    const double total = wf.total_energy();
    const auto ground = std::find_if(est.components.begin(), est.components.end(), [&](const GaussianComponent& c) {
        return c.energy(wf.bin) >= kGroundMinEnergy * total;
    });
    if (ground == est.components.end()) {
        throw WaveformError(WaveformErrorKind::no_ground, "no ground component in waveform " + wf.wave_id);
    }
    est.component = *ground;
    est.gaussian = ground->mean;

    const auto s = smoothed(wf);
    const auto peaks = local_maxima(s, significance_floor(s, wf));
    if (peaks.empty()) throw WaveformError(WaveformErrorKind::no_signal, "no local maximum above noise");
    const std::size_t low = peaks.back();
    est.maximum = wf.top - refine_peak(s, low) * wf.bin;

    // Inflection points on either side of the lowest maximum.
    std::optional<double> below, above;
    for (std::size_t i = low + 1; i + 1 < s.size(); ++i) {
        const double d0 = second_difference(s, i - 1), d1 = second_difference(s, i);
        if (d0 < 0.0 && d1 >= 0.0) {
            below = static_cast<double>(i - 1) + crossing(d0, d1);
            break;
        }
    }
    for (std::size_t i = low; i > 1; --i) {
        const double d0 = second_difference(s, i), d1 = second_difference(s, i - 1);
        if (d0 < 0.0 && d1 >= 0.0) {
            above = static_cast<double>(i) - crossing(d0, d1);
            break;
        }
    }
    if (below && above) {
        est.inflection = wf.top - 0.5 * (*below + *above) * wf.bin;
    } else {
        est.inflection = est.maximum;
    }
    return est;
}

SignalExtent signal_extent(const Waveform& wf, std::span<const GaussianComponent> components) {
    std::optional<std::size_t> first, last;
    for (std::size_t i = 0; i < wf.size(); ++i) {
        if (wf.amplitude[i] > wf.threshold) {
            if (!first) first = i;
            last = i;
        }
    }
    if (!first) throw WaveformError(WaveformErrorKind::no_signal, "waveform has no signal above noise");
    SignalExtent e;
    e.raw_top = wf.elevation(*first);
    e.raw_bottom = wf.elevation(*last);
    e.top = e.raw_bottom;
    e.bottom = e.raw_top;
    const double total = wf.total_energy();
    bool any = false;
    for (const auto& c : components) {
        if (c.energy(wf.bin) < kGroundMinEnergy * total) continue;
        e.top = std::max(e.top, c.mean);
        e.bottom = std::min(e.bottom, c.mean);
        any = true;
    }
    if (!any) {
        e.top = e.raw_top;
        e.bottom = e.raw_bottom;
    }
    e.top = std::clamp(e.top, e.raw_bottom, e.raw_top);
    e.bottom = std::clamp(e.bottom, e.raw_bottom, e.top);
    return e;
}

RhArray rh_metrics(const Waveform& wf, const SignalExtent& extent, double ground) {
    if (ground > extent.top) {
        throw WaveformError(WaveformErrorKind::ground_above_signal, "ground above the top of the signal");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < wf.size(); ++i) {
        if (wf.amplitude[i] > wf.threshold) total += wf.amplitude[i];
    }

    RhArray rh{};
    std::size_t p = 0;
    double cumulative = 0.0;
    for (std::size_t i = wf.size(); i-- > 0 && p < kRhCount;) {
        const double a = wf.amplitude[i] > wf.threshold ? wf.amplitude[i] : 0.0;
        const double lo = wf.elevation(i) - wf.bin / 2.0;
        while (p < kRhCount) {
            const double target = static_cast<double>(p) / 100.0 * total;
            if (cumulative + a < target && i > 0) break;
            double z = a > 0.0 ? lo + (target - cumulative) / a * wf.bin : lo;
            z = std::clamp(z, extent.bottom, extent.top);
            rh[p++] = z - ground;
        }
        cumulative += a;
    }
    for (; p < kRhCount; ++p) rh[p] = extent.top - ground;
    // Guard the sweep against rounding so the array is nondecreasing.
    for (std::size_t q = 1; q < kRhCount; ++q) rh[q] = std::max(rh[q], rh[q - 1]);
    rh[kRhCount - 1] = extent.top - ground;
    rh[0] = extent.bottom - ground;
    return rh;
}

double cover_fraction(double canopy_energy, double ground_energy, double rho_v, double rho_g) {
    const double denom = canopy_energy + ground_energy * rho_v / rho_g;
    if (!(denom > 0.0)) return 0.0;
    return canopy_energy / denom;
}

CoverMetrics cover_metrics(const Waveform& wf, const GroundEstimate& ground, double rho_v, double rho_g) {
    const double total = wf.total_energy();
    const double ig = ground.component.energy(wf.bin);
    if (ig > 1.05 * total) {
        throw WaveformError(WaveformErrorKind::degenerate_cover, "fitted ground energy exceeds the waveform total");
    }
    CoverMetrics m;
    m.cover = cover_from_ground(ig, total, rho_v, rho_g);
    auto half = [&](double g) { return cover_from_ground(2.0 * energy_below(wf, g), total, rho_v, rho_g); };
    m.gauss_half_cover = half(ground.gaussian);
    m.max_half_cover = half(ground.maximum);
    m.infl_half_cover = half(ground.inflection);
    std::array<double, 3> g{ground.gaussian, ground.maximum, ground.inflection};
    std::sort(g.begin(), g.end());
    m.bay_half_cover = half(g[1]);
    return m;
}

std::optional<double> als_cover(const PointCloud& cloud, const FootprintConfig& config) {
    double canopy = 0.0, ground = 0.0;
    for (const auto& p : cloud.points) {
        if (p.return_number != 1) continue;
        const double w = footprint_weight(p, config);
        if (w <= 0.0) continue;
        (p.classification == kClassGround ? ground : canopy) += w;
    }
    if (canopy + ground <= 0.0) return std::nullopt;
    return cover_fraction(canopy, ground, config.rho_v, config.rho_g);
}

double foliage_height_diversity(std::span<const double> layer_energy) {
    double total = 0.0;
    for (double e : layer_energy) total += std::max(e, 0.0);
    if (!(total > 0.0)) return 0.0;
    double h = 0.0;
    for (double e : layer_energy) {
        if (e <= 0.0) continue;
        const double p = e / total;
        h -= p * std::log(p);
    }
    return h;
}

LaiProfile lai_profile(std::span<const double> layer_energy, double scaled_ground_energy) {
    LaiProfile out;
    out.layer_lai.assign(layer_energy.size(), 0.0);
    double canopy = 0.0;
    for (double e : layer_energy) canopy += std::max(e, 0.0);
    const double denom = canopy + std::max(scaled_ground_energy, 0.0);
    if (!(denom > 0.0)) return out;

    auto gap_log = [&](double cumulative) {
        double c = cumulative / denom;
        if (c > kSaturationLimit) {
            c = kSaturationLimit;
            out.saturated = true;
        }
        return std::log(1.0 - c);
    };
    double above = 0.0;
    for (std::size_t j = layer_energy.size(); j-- > 0;) {
        const double below = above + std::max(layer_energy[j], 0.0);
        out.layer_lai[j] = gap_log(above) - gap_log(below);
        above = below;
    }
    return out;
}

namespace {

std::array<double, 3> lai_bins(const LaiProfile& profile) {
    std::array<double, 3> bins{};
    for (std::size_t j = 0; j < profile.layer_lai.size() && j < 30; ++j) bins[j / 10] += profile.layer_lai[j];
    return bins;
}

void add_layer(std::vector<double>& layers, double height, double energy) {
    if (height < 0.0 || energy <= 0.0) return;
    const auto j = static_cast<std::size_t>(height);
    if (layers.size() <= j) layers.resize(j + 1, 0.0);
    layers[j] += energy;
}

double amplitude_at(const Waveform& wf, double elevation) {
    const double u = (wf.top - elevation) / wf.bin;
    if (u < 0.0 || u > static_cast<double>(wf.size() - 1)) return 0.0;
    const auto i = std::min(static_cast<std::size_t>(u), wf.size() - 2);
    const double f = u - static_cast<double>(i);
    return wf.amplitude[i] * (1.0 - f) + wf.amplitude[i + 1] * f;
}

}  // namespace

ProfileMetrics profile_metrics(const Waveform& wf, const GroundEstimate& ground, const RhArray& rh_gauss,
                               double rho_v, double rho_g) {
    ProfileMetrics m;
    const auto ground_profile = component_profile(wf, ground.component);

    std::vector<double> layers(30, 0.0);
    for (std::size_t i = 0; i < wf.size(); ++i) {
        add_layer(layers, wf.elevation(i) - ground.gaussian, wf.amplitude[i] - ground_profile[i]);
    }
    const double ig = std::min(ground.component.energy(wf.bin), wf.total_energy());
    const auto g_profile = lai_profile(layers, ig * rho_v / rho_g);
    m.g_lai = lai_bins(g_profile);
    m.fhd = foliage_height_diversity(layers);

    // Lowest-maximum ground: the return below the peak is mirrored upward and removed.
    std::vector<double> hg_layers(30, 0.0);
    for (std::size_t i = 0; i < wf.size(); ++i) {
        const double h = wf.elevation(i) - ground.maximum;
        if (h <= 0.0) continue;
        add_layer(hg_layers, h, wf.amplitude[i] - amplitude_at(wf, ground.maximum - h));
    }
    const double hg_ground = std::min(2.0 * energy_below(wf, ground.maximum), wf.total_energy());
    const auto hg_profile = lai_profile(hg_layers, hg_ground * rho_v / rho_g);
    m.hg_lai = lai_bins(hg_profile);
    m.saturated = g_profile.saturated || hg_profile.saturated;

    for (double h : rh_gauss) {
        const double v = std::max(h, 0.0);
        m.ni_m2 += v * v;
        m.ni_m2_1 += std::pow(v, 2.1);
    }
    return m;
}

AncillaryMetrics ancillary_metrics(const Waveform& wf, const GroundEstimate& ground, const PointCloud& cloud,
                                   const FootprintConfig& config) {
    AncillaryMetrics m;
    const SignalExtent extent = signal_extent(wf, ground.components);
    m.signal_top = extent.top;
    m.signal_bottom = extent.bottom;
    m.wave_energy = wf.total_energy();

    const auto ground_profile = component_profile(wf, ground.component);
    std::vector<double> canopy(wf.size());
    double canopy_peak = 0.0, canopy_energy = 0.0;
    for (std::size_t i = 0; i < wf.size(); ++i) {
        canopy[i] = std::max(0.0, wf.amplitude[i] - ground_profile[i]);
        canopy_peak = std::max(canopy_peak, canopy[i]);
        canopy_energy += canopy[i];
    }
    const bool has_canopy = canopy_energy > 1e-3 * m.wave_energy;
    if (!has_canopy) canopy_peak = *std::max_element(wf.amplitude.begin(), wf.amplitude.end());

    // Leading edge: from the signal top down to the first half-maximum crossing.
    for (std::size_t i = 0; i < wf.size(); ++i) {
        if (wf.amplitude[i] >= 0.5 * canopy_peak) {
            double e = wf.elevation(i);
            if (i > 0) {
                const double a0 = wf.amplitude[i - 1], a1 = wf.amplitude[i];
                e += wf.bin * (a1 - 0.5 * canopy_peak) / std::max(a1 - a0, 1e-300);
            }
            m.leading_edge = std::max(0.0, extent.raw_top - e);
            break;
        }
    }
    // Trailing edge: from the signal bottom up to half the ground peak.
    const double ground_half = 0.5 * ground.component.amplitude;
    for (std::size_t i = wf.size(); i-- > 0;) {
        if (wf.amplitude[i] >= ground_half) {
            double e = wf.elevation(i);
            if (i + 1 < wf.size()) {
                const double a0 = wf.amplitude[i + 1], a1 = wf.amplitude[i];
                e -= wf.bin * (a1 - ground_half) / std::max(a1 - a0, 1e-300);
            }
            m.trailing_edge = std::max(0.0, e - extent.raw_bottom);
            break;
        }
    }

    if (wf.noise_sd > 0.0) {
        const double required = kDetection90 * wf.noise_sd * wf.pulse_sigma * kSqrt2Pi / wf.bin;
        const double r = required / m.wave_energy;
        m.blair_sense = r >= 1.0 ? 0.0 : config.rho_g * (1.0 - r) / (config.rho_g * (1.0 - r) + r * config.rho_v);
    } else {
        m.blair_sense = 1.0;
        m.blair_saturated = true;
    }

    if (ground.components.size() > 1 && has_canopy) {
        double overlap = 0.0, total_ground = 0.0;
        for (std::size_t i = 0; i < wf.size(); ++i) {
            overlap += std::min(ground_profile[i], canopy[i]);
            total_ground += ground_profile[i];
        }
        if (total_ground > 0.0) m.ground_overlap = overlap / total_ground;
    }

    const auto s = smoothed(wf);
    const auto peaks = local_maxima(s, significance_floor(s, wf));
    if (peaks.size() >= 2) {
        const std::size_t low = peaks[peaks.size() - 1];
        const std::size_t next = peaks[peaks.size() - 2];
        double trough = s[low], curvature = -std::numeric_limits<double>::infinity();
        for (std::size_t i = next; i <= low; ++i) {
            trough = std::min(trough, s[i]);
            curvature = std::max(curvature, second_difference(s, i) / (wf.bin * wf.bin));
        }
        m.ground_min = trough / s[low];
        m.ground_infl = curvature / s[low];
    }

    double weight = 0.0, weighted_z = 0.0;
    std::optional<double> top;
    std::size_t points = 0, beams = 0;
    const double radius = config.diameter / 2.0;
    for (const auto& p : cloud.points) {
        const double w = footprint_weight(p, config);
        if (w > 0.0) {
            top = top ? std::max(*top, p.z) : p.z;
            if (p.classification == kClassGround) {
                weight += w;
                weighted_z += w * p.z;
            }
        }
        const double dx = p.x - config.center_x, dy = p.y - config.center_y;
        if (dx * dx + dy * dy <= radius * radius) {
            ++points;
            if (p.return_number == 1) ++beams;
        }
    }
    if (weight > 0.0) m.true_ground = weighted_z / weight;
    m.true_top = top;
    const double area = std::numbers::pi * radius * radius;
    m.point_density = static_cast<double>(points) / area;
    m.beam_density = static_cast<double>(beams) / area;

    const double extra = ground.component.sigma * ground.component.sigma - wf.pulse_sigma * wf.pulse_sigma -
                         wf.bin * wf.bin / 12.0;
    m.ground_slope = std::atan(std::sqrt(std::max(extra, 0.0)) / config.sigma()) * 180.0 / std::numbers::pi;
    return m;
}

WaveformMetrics waveform_metrics(const Waveform& wf, const PointCloud& cloud, const FootprintConfig& config) {
    WaveformMetrics m;
    m.wave_id = wf.wave_id;
    m.lon = wf.center_x;
    m.lat = wf.center_y;
    m.ground = find_ground(wf);
    m.extent = signal_extent(wf, m.ground.components);
    m.rh_gauss = rh_metrics(wf, m.extent, m.ground.gaussian);
    m.rh_max = rh_metrics(wf, m.extent, m.ground.maximum);
    m.rh_infl = rh_metrics(wf, m.extent, m.ground.inflection);
    m.cover = cover_metrics(wf, m.ground, config.rho_v, config.rho_g);
    m.als_cover = als_cover(cloud, config);
    m.profile = profile_metrics(wf, m.ground, m.rh_gauss, config.rho_v, config.rho_g);
    m.ancillary = ancillary_metrics(wf, m.ground, cloud, config);
    if (m.ancillary.true_ground && *m.ancillary.true_ground <= m.extent.top) {
        m.rh_real = rh_metrics(wf, m.extent, *m.ancillary.true_ground);
    }
    return m;
}

MetricVector to_metric_vector(const WaveformMetrics& m, const std::string& plot_id) {
    MetricVector mv;
    mv.plot_id = plot_id;
    mv.system = SystemTag::sls_fw;
    auto rh = [&](const std::string& name, const std::optional<RhArray>& values) {
        for (std::size_t p = 0; p < kRhCount; p += 5) {
            mv.add(name + "." + std::to_string(p), values ? std::optional<double>((*values)[p]) : std::nullopt);
        }
    };
    const auto& a = m.ancillary;
    mv.add("gHeight", m.ground.gaussian);
    mv.add("maxGround", m.ground.maximum);
    mv.add("inflGround", m.ground.inflection);
    mv.add("signal.top", a.signal_top);
    mv.add("signal.bottom", a.signal_bottom);
    mv.add("cover", m.cover.cover);
    mv.add("leading.edge.ext", a.leading_edge);
    mv.add("trailing.edge.extent", a.trailing_edge);
    rh("rhGauss", m.rh_gauss);
    rh("rhMax", m.rh_max);
    rh("rhInfl", m.rh_infl);
    mv.add("gaussHalfCov", m.cover.gauss_half_cover);
    mv.add("maxHalfCov", m.cover.max_half_cover);
    mv.add("infHalfCov", m.cover.infl_half_cover);
    mv.add("bayHalfCov", m.cover.bay_half_cover);
    mv.add("lon", m.lon);
    mv.add("lat", m.lat);
    mv.add("waveEnergy", a.wave_energy);
    mv.add("blairSense", a.blair_sense);
    mv.add("FHD", m.profile.fhd);
    mv.add("niM2", m.profile.ni_m2);
    mv.add("niM2.1", m.profile.ni_m2_1);
    mv.add("true.ground", a.true_ground);
    mv.add("true.top", a.true_top);
    mv.add("ground.slope", a.ground_slope);
    mv.add("ALS.cover", m.als_cover);
    rh("rhReal", m.rh_real);
    mv.add("groundOverlap", a.ground_overlap);
    mv.add("groundMin", a.ground_min);
    mv.add("groundInfl", a.ground_infl);
    mv.add("pointDense", a.point_density);
    mv.add("beamDense", a.beam_density);
    mv.add("gLAI0t10", m.profile.g_lai[0]);
    mv.add("gLAI10t20", m.profile.g_lai[1]);
    mv.add("gLAI20t30", m.profile.g_lai[2]);
    mv.add("hgLAI0t10", m.profile.hg_lai[0]);
    mv.add("hgLAI10t20", m.profile.hg_lai[1]);
    mv.add("hgLAI20t30", m.profile.hg_lai[2]);
    return mv;
}

MetricVector average_metrics(const std::vector<MetricVector>& footprints, const std::string& plot_id) {
    if (footprints.empty()) throw DataError("no footprints to average for plot " + plot_id);
    if (footprints.size() == 1) {
        MetricVector out = footprints.front();
        out.plot_id = plot_id;
        return out;
    }
    MetricVector out;
    out.plot_id = plot_id;
    out.system = footprints.front().system;
    for (const auto& [name, unused] : footprints.front().values) {
        (void)unused;
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& fp : footprints) {
            if (auto v = fp.get(name)) {
                sum += *v;
                ++count;
            }
        }
        out.add(name, count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt);
    }
    return out;
}

void write_waveform(const std::filesystem::path& path, const Waveform& wf) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "wave_id " << (wf.wave_id.empty() ? "-" : wf.wave_id) << '\n'
        << "center " << format_number(wf.center_x) << ' ' << format_number(wf.center_y) << '\n'
        << "bin " << format_number(wf.bin) << '\n'
        << "pulse_sigma " << format_number(wf.pulse_sigma) << '\n'
        << "noise " << format_number(wf.noise_sd) << ' ' << format_number(wf.threshold) << '\n'
        << "elevation amplitude\n";
    for (std::size_t i = 0; i < wf.size(); ++i) {
        out << format_number(wf.elevation(i)) << ' ' << format_number(wf.amplitude[i]) << '\n';
    }
}

Waveform read_waveform(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    Waveform wf;
    std::string key, second;
    auto expect = [&](const char* name) {
        if (!(in >> key) || key != name) throw DataError(path.string() + ": expected '" + name + "'");
    };
    expect("wave_id");
    in >> wf.wave_id;
    if (wf.wave_id == "-") wf.wave_id.clear();
    expect("center");
    in >> wf.center_x >> wf.center_y;
    expect("bin");
    in >> wf.bin;
    expect("pulse_sigma");
    in >> wf.pulse_sigma;
    expect("noise");
    in >> wf.noise_sd >> wf.threshold;
    expect("elevation");
    expect("amplitude");
    double e, a;
    bool first = true;
    while (in >> e >> a) {
        if (first) {
            wf.top = e;
            first = false;
        }
        wf.amplitude.push_back(a);
    }
    if (first || !(wf.bin > 0.0)) throw DataError(path.string() + ": malformed waveform dump");
    return wf;
}

}  // namespace agb
