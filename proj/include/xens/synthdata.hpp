#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xens/tensor.hpp"

namespace xens {

enum class DatasetKind { InDistribution, Ood };

struct Dataset {
    std::string name;
    DatasetKind kind = DatasetKind::InDistribution;
    size_t side = 0;        // images are side x side, single channel
    size_t classes = 0;     // 0 for OOD sets
    std::vector<Tensor> images;
    std::vector<int> labels;  // empty for OOD sets

    size_t count() const { return images.size(); }
};

// Template identifiers, one per class. The two lists are disjoint by
// construction so out-of-distribution images never reuse an
// in-distribution shape family.
const std::vector<std::string>& in_dist_template_names();
const std::vector<std::string>& ood_template_names();

// Noisy geometric shapes, `per_class` images for each of `classes`
// classes. Pixel values land in [0,1]; with noise_sigma == 0 all images
// of a class are identical.
Dataset gen_in_distribution(size_t classes, size_t side, size_t per_class,
                            double noise_sigma, uint64_t seed, const std::string& name);

// Shapes drawn from the disjoint template list, unlabeled.
Dataset gen_ood(size_t side, size_t count, uint64_t seed, const std::string& name);

// One-line JSON header plus one hex-encoded image row per line; doubles
// round-trip bit-exactly. See README for the exact layout.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace xens
