#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "erfd/background_features.hpp"
#include "erfd/clip.hpp"
#include "erfd/facial_features.hpp"

namespace erfd {

/// 19 (t difference) x 3 (RGB) profile, C order.
using Profile = std::array<double, kDiffCount * kColorCount>;

inline double profile_at(const Profile& p, int j, int c) { return p[j * kColorCount + c]; }

/// Mean over the 16 windows, then over u.
Profile collapse_feature(const FacialFeature& feature);
/// Mean over u.
Profile collapse_window(const WindowFeature& window);

enum class FeatureKind { Facial, Background };

struct ProfileSample {
    int label = 0;  // 0 real, 1 fake
    FeatureKind kind = FeatureKind::Facial;
    Profile values{};
};

/// Per-frame facial and (full-96 clips only) background profiles recovered
/// from a clip tensor.
std::vector<ProfileSample> clip_profiles(const ClipTensor& clip);

struct DistributionRow {
    std::string group;         // "real" | "fake"
    std::string feature_kind;  // "facial" | "background"
    int t_index = 0;           // -9..9
    char channel = 'R';
    double mean = 0.0;
    double std = 0.0;  // population
    std::size_t n = 0;
};

struct Distribution {
    std::vector<DistributionRow> rows;
    std::vector<std::string> warnings;
};

/// Mean and population standard deviation per (group, kind, t, channel).
/// Groups without samples are left out and reported in `warnings`.
Distribution aggregate(const std::vector<ProfileSample>& samples);

void write_distribution_csv(const std::filesystem::path& path, const Distribution& dist);

struct GroupGap {
    double delta = 0.0;      // fake mean - real mean
    double pooled_se = 0.0;  // sqrt(sd_f^2 / n_f + sd_r^2 / n_r)
};

/// Throws std::out_of_range when either group has no row for the cell.
GroupGap group_gap(const Distribution& dist, FeatureKind kind, int t_index, int channel);

}  // namespace erfd
