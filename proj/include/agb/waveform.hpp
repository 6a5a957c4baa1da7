#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "agb/discrete_metrics.hpp"
#include "agb/las_io.hpp"

namespace agb {

enum class WaveformErrorKind { empty_footprint, no_signal, no_ground, ground_above_signal, degenerate_cover };

class WaveformError : public DataError {
public:
    WaveformError(WaveformErrorKind kind, const std::string& message) : DataError(message), kind_(kind) {}
    WaveformErrorKind kind() const { return kind_; }

private:
    WaveformErrorKind kind_;
};

struct FootprintConfig {
    double center_x = 0.0;
    double center_y = 0.0;
    double diameter = 25.0;
    std::optional<double> footprint_sigma;  // horizontal weighting; default diameter / 4
    double pulse_fwhm = 2.34;               // metres of range
    double bin = 0.15;
    double noise_sd = 0.0;
    double rho_v = 0.57;
    double rho_g = 0.4;
    std::uint64_t seed = 123;
    std::string wave_id;

    double sigma() const { return footprint_sigma.value_or(diameter / 4.0); }
    double pulse_sigma() const;
    // Throws ConfigError when a parameter is out of range.
    void validate() const;
};

// Received energy per elevation bin. Index 0 is the highest bin; bin centres
// are top - i * bin.
struct Waveform {
    std::string wave_id;
    double center_x = 0.0;
    double center_y = 0.0;
    double top = 0.0;
    double bin = 0.15;
    double pulse_sigma = 0.0;
    std::vector<double> amplitude;
    // Noise-free contribution of ground-classified points. Empty when the
    // waveform was not simulated here (e.g. read from a dump).
    std::vector<double> ground_amplitude;
    double noise_sd = 0.0;
    // Amplitudes at or below this level are treated as noise.
    double threshold = 0.0;

    std::size_t size() const { return amplitude.size(); }
    double elevation(std::size_t i) const { return top - static_cast<double>(i) * bin; }
    double total_energy() const;
    bool annotated() const { return !ground_amplitude.empty(); }
};

// Each point within 3 footprint sigmas contributes a range-Gaussian pulse
// centred at its elevation, integrated exactly over each bin. Its weight is
// exp(-r^2 / (2 sigma_f^2)) times the canopy or ground reflectance.
Waveform simulate_footprint(const PointCloud& cloud, const FootprintConfig& config);

// Footprint weight a point receives in simulate_footprint (0 outside 3 sigma).
double footprint_weight(const PointRecord& point, const FootprintConfig& config);

struct GaussianComponent {
    double amplitude = 0.0;  // peak energy per bin
    double mean = 0.0;       // elevation, m
    double sigma = 0.0;      // m
    double energy(double bin) const;
    double at(double elevation) const;
};

// Smooths with the pulse kernel, seeds at local maxima and refines all
// components jointly by bounded Levenberg-Marquardt. Ordered by mean, lowest first.
std::vector<GaussianComponent> decompose(const Waveform& wf, std::size_t max_components = 10);

struct GroundEstimate {
    double gaussian = 0.0;    // mean of the lowest fitted component
    double maximum = 0.0;     // lowest local maximum
    double inflection = 0.0;  // midpoint of the lowest inflection pair
    GaussianComponent component;
    std::vector<GaussianComponent> components;
};

GroundEstimate find_ground(const Waveform& wf);

inline constexpr std::size_t kRhCount = 101;
using RhArray = std::array<double, kRhCount>;

struct SignalExtent {
    double top = 0.0;     // mean of the highest component
    double bottom = 0.0;  // mean of the lowest component
    double raw_top = 0.0;     // highest bin above the noise threshold
    double raw_bottom = 0.0;  // lowest bin above the noise threshold
};
// Components carrying under 1% of the energy are ignored for top and bottom.
// Throws WaveformError(no_signal) when no bin exceeds the threshold.
SignalExtent signal_extent(const Waveform& wf, std::span<const GaussianComponent> components);

// RHp: height above `ground` below which p% of the signal energy lies,
// limited to the signal extent. RH0 and RH100 are the extent ends.
RhArray rh_metrics(const Waveform& wf, const SignalExtent& extent, double ground);

// Iv / (Iv + Ig * rho_v / rho_g).
double cover_fraction(double canopy_energy, double ground_energy, double rho_v, double rho_g);

struct CoverMetrics {
    double cover = 0.0;
    double gauss_half_cover = 0.0;
    double max_half_cover = 0.0;
    double infl_half_cover = 0.0;
    double bay_half_cover = 0.0;
};

// bay_half_cover uses the median of the three ground estimates.
CoverMetrics cover_metrics(const Waveform& wf, const GroundEstimate& ground, double rho_v, double rho_g);

// Canopy cover from first returns in the footprint, weighted as in the simulator.
std::optional<double> als_cover(const PointCloud& cloud, const FootprintConfig& config);

// Shannon entropy of the normalized layer energies (zero layers skipped).
double foliage_height_diversity(std::span<const double> layer_energy);

struct LaiProfile {
    std::vector<double> layer_lai;  // per 1 m layer from the ground up
    bool saturated = false;
};

// MacArthur-Horn: layer_energy is canopy energy per 1 m layer from the ground
// up; ground_energy is the reflectance-corrected denominator term Ig*rho_v/rho_g.
LaiProfile lai_profile(std::span<const double> layer_energy, double scaled_ground_energy);

struct ProfileMetrics {
    double fhd = 0.0;
    std::array<double, 3> g_lai{};   // 0-10, 10-20, 20-30 m, Gaussian ground
    std::array<double, 3> hg_lai{};  // same bins, lowest-maximum ground
    double ni_m2 = 0.0;
    double ni_m2_1 = 0.0;
    bool saturated = false;
};

ProfileMetrics profile_metrics(const Waveform& wf, const GroundEstimate& ground, const RhArray& rh_gauss,
                               double rho_v, double rho_g);

struct AncillaryMetrics {
    double signal_top = 0.0;
    double signal_bottom = 0.0;
    double leading_edge = 0.0;
    double trailing_edge = 0.0;
    double blair_sense = 0.0;
    bool blair_saturated = false;  // no noise: sensitivity is not measured
    std::optional<double> ground_overlap;
    std::optional<double> ground_min;
    std::optional<double> ground_infl;
    std::optional<double> true_ground;
    std::optional<double> true_top;
    double ground_slope = 0.0;  // degrees
    double point_density = 0.0;
    double beam_density = 0.0;
    double wave_energy = 0.0;
};

AncillaryMetrics ancillary_metrics(const Waveform& wf, const GroundEstimate& ground, const PointCloud& cloud,
                                   const FootprintConfig& config);

struct WaveformMetrics {
    std::string wave_id;
    SignalExtent extent;
    double lon = 0.0;
    double lat = 0.0;
    GroundEstimate ground;
    RhArray rh_gauss{}, rh_max{}, rh_infl{};
    std::optional<RhArray> rh_real;
    CoverMetrics cover;
    std::optional<double> als_cover;
    ProfileMetrics profile;
    AncillaryMetrics ancillary;
};

WaveformMetrics waveform_metrics(const Waveform& wf, const PointCloud& cloud, const FootprintConfig& config);

// Flattens to named metrics; RH arrays are emitted every 5%.
MetricVector to_metric_vector(const WaveformMetrics& metrics, const std::string& plot_id);

// Element-wise mean over footprints of the same plot (undefined entries skipped).
MetricVector average_metrics(const std::vector<MetricVector>& footprints, const std::string& plot_id);

// Text dump: wave_id, center, bin, noise header lines then "elevation amplitude" rows.
void write_waveform(const std::filesystem::path& path, const Waveform& wf);
Waveform read_waveform(const std::filesystem::path& path);

}  // namespace agb
