#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "darforge/tensor.hpp"

namespace darforge {

struct LabeledDataset {
    std::vector<Tensor> images; // (C, H, W), values in [0, 1]
    std::vector<int> labels;
    std::vector<std::string> class_names;

    size_t size() const { return images.size(); }
    int num_classes() const { return static_cast<int>(class_names.size()); }
    void validate() const; // throws on length mismatch / label range / value range
};

// IDX byte stream (big-endian dims, u8 payload mapped to value/255).
// Accepts the 0x0000 08 NN magic family, NN = 1..4 dims.
Tensor parse_idx(std::span<const uint8_t> bytes);
std::vector<uint8_t> write_idx_u8(const Tensor& t);        // quantizes via round-half-away
std::vector<uint8_t> write_idx_labels(std::span<const int> labels);

// CIFAR-10 binary batch: records of 1 label byte + 3072 pixel bytes
// (R, G, B planes, 32x32).
LabeledDataset parse_cifar10_batch(std::span<const uint8_t> bytes);

// IDX image/label pair -> dataset. 3-dim images become single-channel,
// 4-dim (N,C,H,W) keep their channels.
LabeledDataset dataset_from_idx(std::span<const uint8_t> image_bytes,
                                std::span<const uint8_t> label_bytes,
                                std::vector<std::string> class_names = {});

// Deterministic stratified sample without replacement: per-class pools are
// shuffled with seeded sub-streams, then drained round-robin in ascending
// label order until n items are taken.
LabeledDataset select_subset(const LabeledDataset& ds, size_t n, uint64_t seed);

// PPM P6, maxval 255. Quantization on write is round-half-away-from-zero on
// value*255, so read(write(x)) stays within 1/510 per channel.
Tensor read_ppm(std::span<const uint8_t> bytes);
std::vector<uint8_t> write_ppm(const Tensor& image); // requires 3 channels

// Procedural desk corpus: `count` RGB 32x32 images over 10 shape classes
// (class = index mod 10), deterministic per seed.
LabeledDataset make_synthetic_dataset(size_t count, uint64_t seed,
                                      int height = 32, int width = 32);

// Filesystem helpers (throw IoError).
std::vector<uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const uint8_t> bytes);

// Loads a dataset from a spec string:
//   "synth:COUNT:SEED"          procedural corpus
//   path ending in ".bin"       CIFAR-10 batch file
//   directory                   images.idx + labels.idx pair inside it
LabeledDataset load_dataset(const std::string& spec);

// Writes ds as images.idx (N,C,H,W) + labels.idx (N) into dir.
void write_dataset_idx(const LabeledDataset& ds, const std::string& dir);

} // namespace darforge
