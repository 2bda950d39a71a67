#pragma once

// Air-to-ground channel: LoS probability, elevation angle, path loss and gain.

namespace uavicl::channel {

// How the range factor inside the free-space term is evaluated.
//   slant:           d * sec(phi), i.e. the UAV-sensor slant distance.
//   coverage_radius: r * sec(phi) with r the fixed coverage radius, phi clamped
//                    to max_elevation_deg.
enum class RangeMode { slant, coverage_radius };

struct ChannelParams {
    double a = 9.61;
    double b = 0.16;
    double eta_los_db = 1.0;
    double eta_nlos_db = 20.0;
    double carrier_hz = 2e9;
    double light_speed = 3e8;
    double coverage_radius_m = 100.0;
    RangeMode range_mode = RangeMode::slant;

    static constexpr double max_elevation_deg = 89.999;

    // Throws ConfigError naming the first bad field.
    void validate() const;
};

struct Pose3D {
    double x = 0.0;
    double y = 0.0;
    double h = 100.0;
};

struct GroundPos {
    double x = 0.0;
    double y = 0.0;
};

double horizontal_distance(const Pose3D& uav, const GroundPos& sensor);

// Degrees in (0, 90]; exactly 90 directly below the UAV.
double elevation_angle_deg(const Pose3D& uav, const GroundPos& sensor);

double los_probability(double phi_deg, const ChannelParams& p);

struct PathLoss {
    double db = 0.0;
    bool clamped = false;  // elevation was clamped (coverage_radius mode only)
};

PathLoss path_loss(const Pose3D& uav, const GroundPos& sensor, const ChannelParams& p);

inline double path_loss_db(const Pose3D& uav, const GroundPos& sensor, const ChannelParams& p) {
    return path_loss(uav, sensor, p).db;
}

inline double channel_gain_db(const Pose3D& uav, const GroundPos& sensor, const ChannelParams& p) {
    return -path_loss(uav, sensor, p).db;
}

}  // namespace uavicl::channel
