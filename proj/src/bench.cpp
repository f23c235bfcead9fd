#include "darforge/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <stdexcept>
#include <thread>
#include <tuple>

#include <json.hpp>

#include "darforge/rng.hpp"

namespace darforge {

void SweepConfig::validate() const {
    if (sizes.empty() || counts.empty() || methods.empty())
        throw std::invalid_argument("sweep config: empty grid axis");
    if (eval_models.empty()) throw std::invalid_argument("sweep config: no eval models");
    if (std::find(eval_models.begin(), eval_models.end(), source_model) == eval_models.end())
        throw std::invalid_argument("sweep config: source_model must be one of eval_models");
    if (image_count < 1) throw std::invalid_argument("sweep config: image_count must be >= 1");
    if (jobs < 1) throw std::invalid_argument("sweep config: jobs must be >= 1");
    if (!(min_confidence >= 0.0f && min_confidence <= 1.0f))
        throw std::invalid_argument("sweep config: min_confidence must be in [0, 1]");
    if (!(soa_epsilon >= 0.0f && soa_epsilon <= 1.0f))
        throw std::invalid_argument("sweep config: soa_epsilon must be in [0, 1]");
    DarConfig probe = dar;
    probe.size = sizes.front();
    probe.count = counts.front();
    probe.validate();
}

std::vector<int> select_attack_images(const Model& source, const LabeledDataset& ds,
                                      float min_confidence, size_t max_count) {
    std::vector<int> ids;
    for (size_t i = 0; i < ds.size() && ids.size() < max_count; ++i) {
        const Tensor p = forward(source, ds.images[i]);
        const int label = ds.labels[i];
        int best = 0;
        for (int c = 1; c < static_cast<int>(p.size()); ++c)
            if (p[c] > p[best]) best = c;
        if (best == label && p[label] >= min_confidence) ids.push_back(static_cast<int>(i));
    }
    return ids;
}

namespace {

const Model& model_by_name(const std::vector<Model>& models, const std::string& name) {
    for (const auto& m : models)
        if (m.name == name) return m;
    throw std::invalid_argument("sweep: model '" + name + "' not loaded");
}

uint64_t item_seed(uint64_t global, int image_id, int size, int count, int method_idx) {
    uint64_t s = mix_seed(global, static_cast<uint64_t>(image_id));
    s = mix_seed(s, static_cast<uint64_t>(size));
    s = mix_seed(s, static_cast<uint64_t>(count));
    return mix_seed(s, static_cast<uint64_t>(method_idx));
}

struct WorkItem {
    int image_id;
    int size;
    int count;
    DarMethod method;
};

// Runs fn(item_index) over [0, n) on `jobs` threads. Results must land in
// pre-sized slots so output order is scheduling-independent.
void parallel_for(size_t n, int jobs, const std::function<void(size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    const int nthreads = std::min<int>(jobs, static_cast<int>(n));
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

} // namespace

SweepOutcome run_sweep(const SweepConfig& cfg, const std::vector<Model>& models,
                       const LabeledDataset& dataset) {
    cfg.validate();
    const Model& source = model_by_name(models, cfg.source_model);
    const auto ids = select_attack_images(source, dataset, cfg.min_confidence, cfg.image_count);
    return run_sweep(cfg, models, dataset, ids);
}

SweepOutcome run_sweep(const SweepConfig& cfg, const std::vector<Model>& models,
                       const LabeledDataset& dataset, std::span<const int> image_ids) {
    cfg.validate();
    const Model& source = model_by_name(models, cfg.source_model);
    for (const auto& name : cfg.eval_models) model_by_name(models, name); // presence check

    std::vector<WorkItem> items;
    for (int id : image_ids)
        for (int size : cfg.sizes)
            for (int count : cfg.counts)
                for (DarMethod m : cfg.methods) items.push_back({id, size, count, m});

    std::vector<std::vector<SweepRecord>> slots(items.size());
    std::vector<std::string> errors(items.size());

    parallel_for(items.size(), cfg.jobs, [&](size_t i) {
        const WorkItem& it = items[i];
        try {
            DarConfig dc = cfg.dar;
            dc.size = it.size;
            dc.count = it.count;
            dc.method = it.method;
            dc.seed = item_seed(cfg.global_seed, it.image_id, it.size, it.count,
                                it.method == DarMethod::pgd ? 0 : 1);
            const Tensor& image = dataset.images[it.image_id];
            const int label = dataset.labels[it.image_id];
            const DarResult dar = craft_dar(source, image, label, dc);

            std::vector<std::array<int, 2>> centers;
            for (const auto& reg : dar.regions.regions)
                centers.push_back({reg.center_row, reg.center_col});

            for (const auto& name : cfg.eval_models) {
                const Model& victim = model_by_name(models, name);
                SweepRecord rec;
                rec.image_id = it.image_id;
                rec.size = it.size;
                rec.count = it.count;
                rec.method = dar_method_name(it.method);
                rec.model = name;
                rec.epsilon = dc.epsilon;
                rec.centers = centers;
                rec.orig_conf = confidence(victim, image, label);
                rec.adv_conf = confidence(victim, dar.attack.adversarial, label);
                rec.decrease = rec.orig_conf - rec.adv_conf;
                rec.is_white_box = name == cfg.source_model;
                slots[i].push_back(std::move(rec));
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    SweepOutcome out;
    out.image_ids.assign(image_ids.begin(), image_ids.end());
    for (size_t i = 0; i < items.size(); ++i) {
        if (!errors[i].empty()) {
            out.skipped.push_back({items[i].image_id, items[i].size, items[i].count,
                                   dar_method_name(items[i].method), errors[i]});
            continue;
        }
        for (auto& rec : slots[i]) out.records.push_back(std::move(rec));
    }
    if (out.records.empty())
        throw std::runtime_error("sweep produced no successful items (" +
                                 std::to_string(out.skipped.size()) + " failures)");
    return out;
}

std::vector<SweepRecord> run_soa(const SweepConfig& cfg, const std::vector<Model>& models,
                                 const LabeledDataset& dataset,
                                 std::span<const int> image_ids, float epsilon) {
    cfg.validate();
    const Model& source = model_by_name(models, cfg.source_model);

    AttackConfig ac = cfg.dar.attack_config();
    ac.epsilon = epsilon;
    ac.alpha = epsilon / 4.0f;
    ac.validate();

    std::vector<std::vector<SweepRecord>> slots(image_ids.size());
    parallel_for(image_ids.size(), cfg.jobs, [&](size_t i) {
        const int id = image_ids[i];
        const Tensor& image = dataset.images[id];
        const int label = dataset.labels[id];
        const AttackResult res = pgd(source, image, label, ac);
        for (const auto& name : cfg.eval_models) {
            const Model& victim = model_by_name(models, name);
            SweepRecord rec;
            rec.image_id = id;
            rec.size = 0;
            rec.count = 0;
            rec.method = "soa_pgd";
            rec.model = name;
            rec.epsilon = epsilon;
            rec.orig_conf = confidence(victim, image, label);
            rec.adv_conf = confidence(victim, res.adversarial, label);
            rec.decrease = rec.orig_conf - rec.adv_conf;
            rec.is_white_box = name == cfg.source_model;
            slots[i].push_back(std::move(rec));
        }
    });

    std::vector<SweepRecord> out;
    for (auto& s : slots)
        for (auto& rec : s) out.push_back(std::move(rec));
    return out;
}

SweepReport aggregate(std::span<const SweepRecord> records) {
    if (records.empty()) throw std::invalid_argument("aggregate: no records");

    SweepReport report;
    for (const auto& r : records) {
        if (std::find(report.models.begin(), report.models.end(), r.model) ==
            report.models.end())
            report.models.push_back(r.model);
        if (r.is_white_box) report.source_model = r.model;
    }
    const size_t M = report.models.size();
    auto model_index = [&](const std::string& name) {
        return static_cast<size_t>(std::find(report.models.begin(), report.models.end(), name) -
                                   report.models.begin());
    };

    struct Cell {
        std::vector<double> orig_sum, adv_sum;
        std::vector<size_t> n;
        std::vector<double> decreases;
        Cell(size_t m) : orig_sum(m, 0.0), adv_sum(m, 0.0), n(m, 0) {}
    };
    std::map<std::tuple<std::string, int, int>, Cell> cells;     // DAR rows
    std::map<float, Cell> soa_cells;                             // comparator rows

    for (const auto& r : records) {
        Cell* cell;
        if (r.method == "soa_pgd") {
            cell = &soa_cells.try_emplace(r.epsilon, M).first->second;
        } else {
            cell = &cells.try_emplace(std::make_tuple(r.method, r.size, r.count), M)
                        .first->second;
        }
        const size_t m = model_index(r.model);
        cell->orig_sum[m] += r.orig_conf;
        cell->adv_sum[m] += r.adv_conf;
        cell->n[m] += 1;
        cell->decreases.push_back(static_cast<double>(r.orig_conf) - r.adv_conf);
    }

    for (const auto& [key, cell] : cells) {
        ReportRow row;
        row.method = std::get<0>(key);
        row.size = std::get<1>(key);
        row.count = std::get<2>(key);
        row.mean_orig_conf.resize(M, 0.0);
        row.mean_adv_conf.resize(M, 0.0);
        double orig_mean_sum = 0.0, adv_mean_sum = 0.0;
        for (size_t m = 0; m < M; ++m) {
            if (cell.n[m] == 0)
                throw std::invalid_argument("aggregate: model " + report.models[m] +
                                            " missing from a sweep cell");
            row.mean_orig_conf[m] = cell.orig_sum[m] / static_cast<double>(cell.n[m]);
            row.mean_adv_conf[m] = cell.adv_sum[m] / static_cast<double>(cell.n[m]);
            orig_mean_sum += row.mean_orig_conf[m];
            adv_mean_sum += row.mean_adv_conf[m];
        }
        row.ave_decrease = orig_mean_sum / static_cast<double>(M) -
                           adv_mean_sum / static_cast<double>(M);
        row.n_records = cell.decreases.size();
        if (cell.decreases.size() > 1) {
            double mean = 0.0;
            for (double d : cell.decreases) mean += d;
            mean /= static_cast<double>(cell.decreases.size());
            double var = 0.0;
            for (double d : cell.decreases) var += (d - mean) * (d - mean);
            row.std_decrease = std::sqrt(var / static_cast<double>(cell.decreases.size() - 1));
        }
        report.rows.push_back(std::move(row));
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.method, a.size, a.count) < std::tie(b.method, b.size, b.count);
    });

    // Best DAR-PGD cell, for the comparator gap.
    double best_dar = 0.0;
    int best_size = 0, best_count = 0;
    bool have_dar = false;
    for (const auto& row : report.rows) {
        if (row.method != "pgd") continue;
        if (!have_dar || row.ave_decrease > best_dar) {
            best_dar = row.ave_decrease;
            best_size = row.size;
            best_count = row.count;
            have_dar = true;
        }
    }

    for (const auto& [eps, cell] : soa_cells) {
        SoaBlock block;
        block.epsilon = eps;
        double sum = 0.0;
        for (size_t m = 0; m < M; ++m) {
            const double denom = cell.n[m] == 0 ? 1.0 : static_cast<double>(cell.n[m]);
            const double dec = (cell.orig_sum[m] - cell.adv_sum[m]) / denom;
            block.mean_adv_conf_per_model.push_back(cell.adv_sum[m] / denom);
            block.mean_decrease_per_model.push_back(dec);
            sum += dec;
        }
        block.mean_decrease = sum / static_cast<double>(M);
        if (have_dar) {
            block.best_dar_decrease = best_dar;
            block.best_size = best_size;
            block.best_count = best_count;
            block.gap = block.mean_decrease - best_dar;
        }
        report.soa.push_back(std::move(block));
    }
    return report;
}

// -- raw log ------------------------------------------------------------------

std::string to_jsonl(std::span<const SweepRecord> records) {
    std::string out;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["image_id"] = r.image_id;
        j["model"] = r.model;
        j["method"] = r.method;
        j["size"] = r.size;
        j["count"] = r.count;
        j["epsilon"] = r.epsilon;
        auto centers = nlohmann::ordered_json::array();
        for (const auto& c : r.centers) centers.push_back({c[0], c[1]});
        j["centers"] = centers;
        j["orig_conf"] = r.orig_conf;
        j["adv_conf"] = r.adv_conf;
        j["is_white_box"] = r.is_white_box;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<SweepRecord> parse_jsonl(const std::string& text) {
    std::vector<SweepRecord> records;
    size_t pos = 0;
    int line_no = 0;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        const std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw std::invalid_argument("raw record log: bad JSON at line " +
                                        std::to_string(line_no));
        try {
            SweepRecord r;
            r.image_id = j.at("image_id").get<int>();
            r.model = j.at("model").get<std::string>();
            r.method = j.at("method").get<std::string>();
            r.size = j.at("size").get<int>();
            r.count = j.at("count").get<int>();
            r.epsilon = j.at("epsilon").get<float>();
            for (const auto& c : j.at("centers"))
                r.centers.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
            r.orig_conf = j.at("orig_conf").get<float>();
            r.adv_conf = j.at("adv_conf").get<float>();
            r.decrease = r.orig_conf - r.adv_conf;
            r.is_white_box = j.at("is_white_box").get<bool>();
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("raw record log: line " + std::to_string(line_no) +
                                        ": " + e.what());
        }
    }
    return records;
}

// -- rendering ----------------------------------------------------------------

namespace {

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

} // namespace

std::string emit_csv(const SweepReport& report) {
    std::string out = "size,count,method,model,mean_adv_conf,ave_decrease,is_white_box\n";
    for (const auto& row : report.rows) {
        for (size_t m = 0; m < report.models.size(); ++m) {
            out += std::to_string(row.size) + "," + std::to_string(row.count) + "," +
                   row.method + "," + report.models[m] + "," + fmt3(row.mean_adv_conf[m]) +
                   "," + fmt3(row.ave_decrease) + "," +
                   (report.models[m] == report.source_model ? "true" : "false") + "\n";
        }
    }
    for (const auto& block : report.soa) {
        for (size_t m = 0; m < report.models.size(); ++m) {
            out += "0,0,soa_pgd," + report.models[m] + "," +
                   fmt3(block.mean_adv_conf_per_model[m]) + "," + fmt3(block.mean_decrease) +
                   "," + (report.models[m] == report.source_model ? "true" : "false") + "\n";
        }
    }
    return out;
}

std::string emit_markdown(const SweepReport& report) {
    std::string out = "# DAR sweep report\n";
    for (const char* method : {"pgd", "uap"}) {
        bool any = false;
        for (const auto& row : report.rows) any = any || row.method == method;
        if (!any) continue;
        out += "\n## DAR ";
        out += method == std::string("pgd") ? "PGD" : "UAP";
        out += "\n\n| Size | Number |";
        for (const auto& m : report.models) out += " " + m + " |";
        out += " Ave. decrease | Std. decrease |\n|---|---|";
        for (size_t m = 0; m < report.models.size(); ++m) out += "---|";
        out += "---|---|\n";
        for (const auto& row : report.rows) {
            if (row.method != method) continue;
            out += "| " + std::to_string(row.size) + " | " + std::to_string(row.count) + " |";
            for (size_t m = 0; m < report.models.size(); ++m)
                out += " " + fmt3(row.mean_adv_conf[m]) + " |";
            out += " " + fmt3(row.ave_decrease) + " | " + fmt3(row.std_decrease) + " |\n";
        }
    }
    if (!report.soa.empty()) {
        out += "\n## Full-image PGD comparison\n\n";
        for (const auto& block : report.soa) {
            out += "- epsilon " + fmt3(block.epsilon) + ": mean decrease " +
                   fmt3(block.mean_decrease) + " (";
            for (size_t m = 0; m < report.models.size(); ++m) {
                if (m) out += ", ";
                out += report.models[m] + " " + fmt3(block.mean_decrease_per_model[m]);
            }
            out += "); best DAR-PGD cell (s=" + std::to_string(block.best_size) +
                   ", n=" + std::to_string(block.best_count) + ") " +
                   fmt3(block.best_dar_decrease) + ", gap " + fmt3(block.gap) + "\n";
        }
    }
    if (!report.metadata.empty()) {
        out += "\n## Metadata\n\n";
        for (const auto& [k, v] : report.metadata) out += "- " + k + ": " + v + "\n";
    }
    return out;
}

// -- statistics ----------------------------------------------------------------

double sign_test_p_value(int positives, int n) {
    if (n < 0 || positives < 0 || positives > n)
        throw std::invalid_argument("sign_test_p_value: bad counts");
    if (n == 0) return 1.0;
    double p = 0.0;
    for (int i = positives; i <= n; ++i) {
        const double logc = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                            std::lgamma(n - i + 1.0) - n * std::log(2.0);
        p += std::exp(logc);
    }
    return std::min(p, 1.0);
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
    const size_t n = v.size();
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

} // namespace

double spearman_rank_correlation(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman: need two equal-length series");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double cov = 0.0, vx = 0.0, vy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0.0 || vy == 0.0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

int disk_pixel_area(int diameter) {
    if (diameter < 1) throw std::invalid_argument("disk_pixel_area: diameter must be >= 1");
    const long s = diameter;
    int area = 0;
    for (long dr = -s; dr <= s; ++dr)
        for (long dc = -s; dc <= s; ++dc)
            if (4 * (dr * dr + dc * dc) <= s * s) ++area;
    return area;
}

} // namespace darforge
