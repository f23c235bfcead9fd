#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "darforge/dar.hpp"
#include "darforge/data.hpp"
#include "darforge/model.hpp"

namespace darforge {

// Full experimental protocol configuration.
struct SweepConfig {
    std::vector<int> sizes = {2, 6, 10, 14, 18};
    std::vector<int> counts = {1, 2, 3, 4};
    std::vector<DarMethod> methods = {DarMethod::pgd, DarMethod::uap};
    std::string source_model;              // white-box victim
    std::vector<std::string> eval_models;  // must contain source_model
    size_t image_count = 100;
    uint64_t global_seed = 42;
    DarConfig dar;                         // epsilon/alpha/steps/smoothing defaults
    float soa_epsilon = 2.0f / 255.0f;     // full-image comparator budget
    float min_confidence = 0.5f;           // inclusion filter threshold
    int jobs = 1;

    void validate() const;
};

// One (image, config, model) measurement. Also the raw-log line payload;
// the log keeps the DarResult export fields plus is_white_box.
struct SweepRecord {
    int image_id = 0;                         // index into the sweep dataset
    int size = 0, count = 0;                  // 0 for full-image comparator rows
    std::string method;                       // "pgd" | "uap" | "soa_pgd"
    std::string model;
    float epsilon = 0.0f;
    std::vector<std::array<int, 2>> centers;  // region centers, empty for soa
    float orig_conf = 0.0f;
    float adv_conf = 0.0f;
    float decrease = 0.0f;                    // orig_conf - adv_conf
    bool is_white_box = false;
};

struct SweepError {
    int image_id = 0;
    int size = 0, count = 0;
    std::string method;
    std::string message;
};

struct SweepOutcome {
    std::vector<SweepRecord> records;
    std::vector<SweepError> skipped;
    std::vector<int> image_ids; // images that passed the inclusion filter
};

// Images the source model classifies correctly with confidence >=
// min_confidence, in dataset order, at most max_count of them.
std::vector<int> select_attack_images(const Model& source, const LabeledDataset& ds,
                                      float min_confidence, size_t max_count);

// For every image x (size, count, method): craft the DAR on the source
// model once, evaluate the adversarial image against every eval model.
// Item failures are recorded and skipped; zero successful items throws.
// Record content is independent of cfg.jobs.
SweepOutcome run_sweep(const SweepConfig& cfg, const std::vector<Model>& models,
                       const LabeledDataset& dataset);
SweepOutcome run_sweep(const SweepConfig& cfg, const std::vector<Model>& models,
                       const LabeledDataset& dataset, std::span<const int> image_ids);

// Full-image PGD comparator at `epsilon` on the same images; records carry
// method "soa_pgd" and size = count = 0.
std::vector<SweepRecord> run_soa(const SweepConfig& cfg, const std::vector<Model>& models,
                                 const LabeledDataset& dataset,
                                 std::span<const int> image_ids, float epsilon);

struct ReportRow {
    std::string method;
    int size = 0, count = 0;
    std::vector<double> mean_adv_conf;  // per model, report column order
    std::vector<double> mean_orig_conf;
    double ave_decrease = 0.0;          // mean orig across models - mean adv across models
    double std_decrease = 0.0;          // sample SD of per-record decreases in the row
    size_t n_records = 0;
};

struct SoaBlock {
    float epsilon = 0.0f;
    std::vector<double> mean_adv_conf_per_model;
    std::vector<double> mean_decrease_per_model;
    double mean_decrease = 0.0;
    double best_dar_decrease = 0.0;  // best DAR-PGD row at this point of comparison
    int best_size = 0, best_count = 0;
    double gap = 0.0;                // mean_decrease - best_dar_decrease
};

struct SweepReport {
    std::vector<std::string> models;      // column order (first-seen in records)
    std::string source_model;
    std::vector<ReportRow> rows;          // sorted by (method, size, count)
    std::vector<SoaBlock> soa;            // one block per comparator epsilon
    std::vector<std::pair<std::string, std::string>> metadata;
};

// Groups records by (method, size, count); full-image comparator records
// become SoaBlocks (one per distinct epsilon). Row statistics recompute
// exactly from the records.
SweepReport aggregate(std::span<const SweepRecord> records);

// Raw log: one JSON object per line, fields image_id, model, method, size,
// count, epsilon, centers, orig_conf, adv_conf, is_white_box.
std::string to_jsonl(std::span<const SweepRecord> records);
std::vector<SweepRecord> parse_jsonl(const std::string& text);

// CSV columns: size,count,method,model,mean_adv_conf,ave_decrease,is_white_box.
// Markdown renders one table per method in the (size, count) grid layout.
// Floats print with 3 decimals.
std::string emit_csv(const SweepReport& report);
std::string emit_markdown(const SweepReport& report);

// -- statistics -------------------------------------------------------------

// One-sided exact binomial sign test: P(X >= positives | n, p = 1/2).
double sign_test_p_value(int positives, int n);

// Spearman rank correlation with average ranks on ties.
double spearman_rank_correlation(std::span<const double> x, std::span<const double> y);

// Pixel count of an unclipped rasterized disk of the given diameter.
int disk_pixel_area(int diameter);

} // namespace darforge
