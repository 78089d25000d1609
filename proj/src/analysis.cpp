#include "erfd/analysis.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <stdexcept>

namespace erfd {

Profile collapse_window(const WindowFeature& window) {
    Profile out{};
    for (int u = 0; u < kWindowSize; ++u) {
        for (int j = 0; j < kDiffCount; ++j) {
            for (int c = 0; c < kColorCount; ++c) out[j * kColorCount + c] += window.at(u, j, c);
        }
    }
    for (auto& v : out) v /= kWindowSize;
    return out;
}

Profile collapse_feature(const FacialFeature& feature) {
    Profile out{};
    for (const auto& w : feature.windows) {
        const Profile p = collapse_window(w);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
    }
    for (auto& v : out) v /= static_cast<double>(feature.windows.size());
    return out;
}

std::vector<ProfileSample> clip_profiles(const ClipTensor& clip) {
    std::vector<ProfileSample> out;
    const bool with_background = clip.channels == 2 * kFacialChannels;
    const double norm = 1.0 / (kFacialWindowCount * kWindowSize);
    for (int f = 0; f < clip.frames; ++f) {
        ProfileSample facial{clip.label, FeatureKind::Facial, {}};
        ProfileSample background{clip.label, FeatureKind::Background, {}};
        for (int w = 0; w < kFacialWindowCount; ++w) {
            for (int c = 0; c < kColorCount; ++c) {
                const int ch = w * kColorCount + c;
                for (int u = 0; u < kWindowSize; ++u) {
                    for (int j = 0; j < kDiffCount; ++j) {
                        const double fv = clip.at(ch, f, u, j);
                        facial.values[j * kColorCount + c] += fv;
                        if (with_background) {
                            // B = F - D, identical for every window.
                            background.values[j * kColorCount + c] +=
                                fv - clip.at(kFacialChannels + ch, f, u, j);
                        }
                    }
                }
            }
        }
        for (auto& v : facial.values) v *= norm;
        out.push_back(facial);
        if (with_background) {
            for (auto& v : background.values) v *= norm;
            out.push_back(background);
        }
    }
    return out;
}

namespace {

const char* group_name(int label) { return label == 1 ? "fake" : "real"; }
const char* kind_name(FeatureKind kind) {
    return kind == FeatureKind::Facial ? "facial" : "background";
}
constexpr char kChannelNames[kColorCount] = {'R', 'G', 'B'};

}  // namespace

Distribution aggregate(const std::vector<ProfileSample>& samples) {
    Distribution dist;
    for (int label : {0, 1}) {
        for (FeatureKind kind : {FeatureKind::Facial, FeatureKind::Background}) {
            std::vector<const Profile*> group;
            for (const auto& s : samples) {
                if (s.label == label && s.kind == kind) group.push_back(&s.values);
            }
            if (group.empty()) {
                dist.warnings.push_back(std::string("no samples for ") + group_name(label) + "/" +
                                        kind_name(kind) + "; omitted");
                continue;
            }
            const double n = static_cast<double>(group.size());
            for (int j = 0; j < kDiffCount; ++j) {
                for (int c = 0; c < kColorCount; ++c) {
                    const int i = j * kColorCount + c;
                    double sum = 0.0;
                    for (const auto* p : group) sum += (*p)[i];
                    const double mean = sum / n;
                    double sq = 0.0;
                    for (const auto* p : group) sq += ((*p)[i] - mean) * ((*p)[i] - mean);
                    dist.rows.push_back({group_name(label), kind_name(kind), j - kCenterDiff,
                                         kChannelNames[c], mean, std::sqrt(sq / n),
                                         group.size()});
                }
            }
        }
    }
    return dist;
}

void write_distribution_csv(const std::filesystem::path& path, const Distribution& dist) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write distribution csv: " + path.string());
    out << "# std is the population standard deviation over frames\n";
    out << "group,feature_kind,t_index,channel,mean,std,n\n";
    out << std::setprecision(17);
    for (const auto& r : dist.rows) {
        out << r.group << ',' << r.feature_kind << ',' << r.t_index << ',' << r.channel << ','
            << r.mean << ',' << r.std << ',' << r.n << '\n';
    }
    if (!out) throw std::runtime_error("failed writing distribution csv: " + path.string());
}

GroupGap group_gap(const Distribution& dist, FeatureKind kind, int t_index, int channel) {
    const DistributionRow* real = nullptr;
    const DistributionRow* fake = nullptr;
    for (const auto& r : dist.rows) {
        if (r.feature_kind != kind_name(kind) || r.t_index != t_index ||
            r.channel != kChannelNames[channel]) {
            continue;
        }
        (r.group == "fake" ? fake : real) = &r;
    }
    if (!real || !fake) throw std::out_of_range("distribution lacks one of the groups");
    return {fake->mean - real->mean,
            std::sqrt(fake->std * fake->std / static_cast<double>(fake->n) +
                      real->std * real->std / static_cast<double>(real->n))};
}

}  // namespace erfd
