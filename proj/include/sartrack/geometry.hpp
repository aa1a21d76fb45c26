#ifndef SARTRACK_GEOMETRY_HPP
#define SARTRACK_GEOMETRY_HPP

// Shared geometric types and the perception output contract (person
// detections with COCO-17 pose keypoints and optional face embeddings).

#include "sartrack/errors.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

namespace sartrack {

/// Wraps an angle into (-pi, pi].
inline double normalize_heading(double h)
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(h, two_pi);
    if (r <= -std::numbers::pi) {
        r += two_pi;
    } else if (r > std::numbers::pi) {
        r -= two_pi;
    }
    return r;
}

/// UAV pose. x forward, y left, z up (meters); heading counter-clockwise from +x.
struct WorldPose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double heading = 0.0;

    bool operator==(const WorldPose&) const = default;
};

struct CameraModel {
    double focal_px = 700.0;
    double center_x = 640.0;
    double center_y = 360.0;
    double width = 1280.0;
    double height = 720.0;

    bool valid() const
    {
        return focal_px > 0.0 && width > 0.0 && height > 0.0 && center_x > 0.0 &&
               center_x < width && center_y > 0.0 && center_y < height;
    }

    bool contains(double u, double v) const { return u >= 0.0 && u < width && v >= 0.0 && v < height; }
};

struct PixelPoint {
    double u = 0.0;
    double v = 0.0;

    bool operator==(const PixelPoint&) const = default;
};

inline double pixel_distance(PixelPoint a, PixelPoint b) { return std::hypot(a.u - b.u, a.v - b.v); }

/// COCO-17 keypoint order, as emitted by the pose model.
enum class Keypoint : std::size_t {
    nose = 0,
    left_eye,
    right_eye,
    left_ear,
    right_ear,
    left_shoulder,
    right_shoulder,
    left_elbow,
    right_elbow,
    left_wrist,
    right_wrist,
    left_hip,
    right_hip,
    left_knee,
    right_knee,
    left_ankle,
    right_ankle,
};

inline constexpr std::size_t keypoint_count = 17;

inline constexpr std::array<std::string_view, keypoint_count> keypoint_names = {
    "nose",           "left_eye",      "right_eye",      "left_ear",   "right_ear",
    "left_shoulder",  "right_shoulder", "left_elbow",    "right_elbow", "left_wrist",
    "right_wrist",    "left_hip",      "right_hip",      "left_knee",  "right_knee",
    "left_ankle",     "right_ankle",
};

struct KeypointObservation {
    double u = 0.0;
    double v = 0.0;
    bool visible = false;

    bool operator==(const KeypointObservation&) const = default;
};

struct KeypointSet {
    std::array<KeypointObservation, keypoint_count> points{};

    const KeypointObservation& operator[](Keypoint k) const { return points[static_cast<std::size_t>(k)]; }
    KeypointObservation& operator[](Keypoint k) { return points[static_cast<std::size_t>(k)]; }

    bool visible(Keypoint k) const { return (*this)[k].visible; }

    PixelPoint at(Keypoint k) const
    {
        const auto& p = (*this)[k];
        if (!p.visible) {
            throw MissingKeypointError(std::string(keypoint_names[static_cast<std::size_t>(k)]));
        }
        return {p.u, p.v};
    }

    bool operator==(const KeypointSet&) const = default;
};

inline PixelPoint midpoint(PixelPoint a, PixelPoint b) { return {(a.u + b.u) / 2.0, (a.v + b.v) / 2.0}; }

/// Mean of the two shoulder keypoints. Throws MissingKeypointError if either is invisible.
inline PixelPoint shoulder_midpoint(const KeypointSet& kps)
{
    return midpoint(kps.at(Keypoint::left_shoulder), kps.at(Keypoint::right_shoulder));
}

inline PixelPoint hip_midpoint(const KeypointSet& kps)
{
    return midpoint(kps.at(Keypoint::left_hip), kps.at(Keypoint::right_hip));
}

/// Distance between the shoulder midpoint and the hip midpoint, in pixels.
/// This is the body-size measurement the range model consumes.
inline double shoulder_hip_pixel_distance(const KeypointSet& kps)
{
    return pixel_distance(shoulder_midpoint(kps), hip_midpoint(kps));
}

inline bool has_torso(const KeypointSet& kps)
{
    return kps.visible(Keypoint::left_shoulder) && kps.visible(Keypoint::right_shoulder) &&
           kps.visible(Keypoint::left_hip) && kps.visible(Keypoint::right_hip);
}

inline constexpr std::size_t embedding_dim = 128;
using EmbeddingValues = std::array<double, embedding_dim>;

struct BoundingBox {
    double u_min = 0.0;
    double v_min = 0.0;
    double u_max = 0.0;
    double v_max = 0.0;

    bool non_degenerate() const { return u_max > u_min && v_max > v_min; }
    PixelPoint center() const { return {(u_min + u_max) / 2.0, (v_min + v_max) / 2.0}; }
    bool contains(PixelPoint p, double margin = 0.0) const
    {
        return p.u >= u_min - margin && p.u <= u_max + margin && p.v >= v_min - margin &&
               p.v <= v_max + margin;
    }
};

/// One person-class detection with its tracker id.
struct TrackedDetection {
    int track_id = 0;
    BoundingBox bbox;
    std::optional<KeypointSet> keypoints;
    std::optional<EmbeddingValues> embedding;
};

/// Everything perception reports for a single camera frame.
struct DetectionFrame {
    double t = 0.0;
    std::vector<TrackedDetection> detections;

    const TrackedDetection* find(int track_id) const
    {
        for (const auto& d : detections) {
            if (d.track_id == track_id) {
                return &d;
            }
        }
        return nullptr;
    }
};

/// Velocity command sent to the UAV. vx, vy, vz are normalized to [-1, 1];
/// yaw_rate is rad/s, positive counter-clockwise.
struct VelocityCommand {
    double vx = 0.0;
    double vy = 0.0;
    double vz = 0.0;
    double yaw_rate = 0.0;

    bool operator==(const VelocityCommand&) const = default;
};

} // namespace sartrack

#endif // SARTRACK_GEOMETRY_HPP
