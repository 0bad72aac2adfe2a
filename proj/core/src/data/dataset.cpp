#include "gentract/data/dataset.hpp"

#include <stdexcept>

#include "gentract/tract/augment.hpp"

namespace gentract::data {

std::size_t TrainingDataset::total_streamlines() const {
    std::size_t n = 0;
    for (const Subject& s : subjects) n += s.streamlines.size();
    return n;
}

std::pair<int, int> TrainingDataset::locate(std::size_t global_index) const {
    for (std::size_t si = 0; si < subjects.size(); ++si) {
        if (global_index < subjects[si].streamlines.size())
            return {static_cast<int>(si), static_cast<int>(global_index)};
        global_index -= subjects[si].streamlines.size();
    }
    throw std::out_of_range("dataset: global streamline index out of range");
}

nd::Tensor streamline_to_tensor(const tract::Streamline& s) {
    nd::Tensor t({static_cast<int>(s.size()), 3});
    for (std::size_t i = 0; i < s.size(); ++i)
        for (int a = 0; a < 3; ++a) t[static_cast<std::int64_t>(i) * 3 + a] = s[i][static_cast<std::size_t>(a)];
    return t;
}

tract::Streamline tensor_to_streamline(const nd::Tensor& t) {
    if (t.rank() != 2 || t.dim(1) != 3) throw std::invalid_argument("expected a (p, 3) tensor");
    tract::Streamline s(static_cast<std::size_t>(t.dim(0)));
    for (int i = 0; i < t.dim(0); ++i)
        for (int a = 0; a < 3; ++a) s[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] = t[static_cast<std::int64_t>(i) * 3 + a];
    return s;
}

TrainingDataset build_training_dataset(std::vector<std::pair<sh::SHVolume, tract::Tractogram>> pairs,
                                       int points, const AugmentSpec& augment,
                                       const tract::ScalingStats* fixed_stats) {
    if (pairs.empty()) throw std::invalid_argument("dataset: no (volume, tractogram) pairs");
    if (points < 2) throw std::invalid_argument("dataset: points must be >= 2");

    const std::size_t base = pairs.size();
    for (std::size_t i = 0; i < base; ++i) {
        for (char axis : augment.axes) {
            for (double deg : augment.rotations_deg) {
                auto rotated = tract::rotate_pair(pairs[i].first, pairs[i].second,
                                                  deg * 3.14159265358979323846 / 180.0,
                                                  tract::axis_from_char(axis));
                pairs.emplace_back(std::move(rotated.first), std::move(rotated.second));
            }
        }
    }

    TrainingDataset ds;
    ds.points = points;
    if (fixed_stats != nullptr) {
        ds.stats = *fixed_stats;
    } else {
        std::vector<const sh::SHVolume*> vols;
        std::vector<const tract::Streamline*> lines;
        for (const auto& [v, t] : pairs) {
            vols.push_back(&v);
            for (const tract::Streamline& s : t.streamlines) lines.push_back(&s);
        }
        ds.stats = tract::ScalingStats::compute(vols, lines);
    }

    for (const auto& [v, t] : pairs) {
        Subject subj;
        subj.volume = tract::zscore_volume(v, ds.stats);
        subj.streamlines.reserve(t.streamlines.size());
        for (const tract::Streamline& s : t.streamlines) {
            const tract::Streamline prepped =
                tract::minmax_scale(tract::resample_streamline(tract::canonicalize(s), points), ds.stats);
            subj.streamlines.push_back(streamline_to_tensor(prepped));
        }
        ds.subjects.push_back(std::move(subj));
    }
    return ds;
}

}  // namespace gentract::data
