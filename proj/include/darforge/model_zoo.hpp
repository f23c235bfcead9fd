#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "darforge/data.hpp"
#include "darforge/model.hpp"

namespace darforge {

// Victim architecture descriptor. The three canonical specs form a graded
// triple (~50k / ~200k / ~500k parameters) with structurally distinct
// layouts so black-box transfer between them is meaningful.
struct ModelSpec {
    std::string name;
    std::vector<int> input_shape; // (C, H, W)
    int num_classes = 0;
    std::vector<Layer> layers;    // weights unallocated until instantiated

    size_t param_count() const;
};

// dar_small, dar_medium, dar_large.
std::vector<ModelSpec> canonical_specs();
const ModelSpec& spec_by_name(const std::string& name); // throws on unknown name
std::vector<std::string> canonical_spec_names();

// Fresh model with seeded He-uniform weight init (biases zero).
Model instantiate(const ModelSpec& spec, uint64_t seed);

struct TrainConfig {
    int epochs = 3;
    float lr = 0.05f;
    int batch_size = 16;
    uint64_t seed = 1;
};

struct TrainReport {
    Model model;
    std::vector<float> epoch_accuracy; // running train accuracy per epoch
    std::vector<float> epoch_loss;     // mean train loss per epoch
};

// Plain SGD. Deterministic per (spec, dataset, cfg); rejects empty datasets
// and epochs < 1.
TrainReport train_model(const ModelSpec& spec, const LabeledDataset& dataset,
                        const TrainConfig& cfg);

struct EvalResult {
    float accuracy = 0.0f;
    float mean_true_class_confidence = 0.0f;
};

EvalResult evaluate(const Model& model, const LabeledDataset& dataset);

// Checkpoint file: "DARW" magic, u32 version, spec name, per-tensor records
// (u32 rank, u32 dims, little-endian f32 payload), trailing CRC-32 of all
// payload bytes. Round-trip is bit-exact; load rebuilds the architecture
// from canonical_specs and verifies every field.
void save_checkpoint(const Model& model, const std::string& path);
Model load_checkpoint(const std::string& path);
std::vector<uint8_t> serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(std::span<const uint8_t> bytes);

uint32_t crc32(std::span<const uint8_t> bytes);

} // namespace darforge
