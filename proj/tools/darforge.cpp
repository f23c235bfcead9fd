// darforge: train desk-scale victim models, run single-image attacks,
// execute the full size/count/method sweep with black-box transfer, and
// render reports from raw record logs.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "darforge/attacks.hpp"
#include "darforge/bench.hpp"
#include "darforge/config.hpp"
#include "darforge/dar.hpp"
#include "darforge/data.hpp"
#include "darforge/errors.hpp"
#include "darforge/model_zoo.hpp"

namespace fs = std::filesystem;
using namespace darforge;

namespace {

uint64_t env_default_seed() {
    if (const char* e = std::getenv("DAR_FORGE_SEED")) {
        try {
            return std::stoull(e);
        } catch (const std::logic_error&) {
            throw ConfigError(std::string("DAR_FORGE_SEED is not an integer: ") + e);
        }
    }
    return 42;
}

RunConfig maybe_load_config(const std::string& path) {
    if (path.empty()) return {};
    return load_run_config(path);
}

void write_text(const std::string& path, const std::string& text) {
    write_file(path, std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(text.data()),
                                              text.size()));
}

std::string read_text(const std::string& path) {
    const auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
    std::string config_path, spec, data, test_data, out;
    long epochs = -1;
    double lr = -1.0;
    long batch = -1;
    uint64_t seed = 0;
    bool seed_set = false;
};

void run_train(const TrainArgs& a) {
    const RunConfig rc = maybe_load_config(a.config_path);
    const std::string spec_name =
        !a.spec.empty() ? a.spec : rc.get("model", "spec", "dar_small");
    const std::string data = !a.data.empty() ? a.data : rc.get("train", "data", "");
    const std::string test_data =
        !a.test_data.empty() ? a.test_data : rc.get("train", "test_data", "");
    const std::string out = !a.out.empty() ? a.out : rc.get("train", "out", "");
    if (data.empty()) throw ConfigError("train: no dataset (--data or [train] data)");
    if (out.empty()) throw ConfigError("train: no output path (--out or [train] out)");

    TrainConfig tc;
    tc.epochs = static_cast<int>(a.epochs >= 0 ? a.epochs : rc.get_int("train", "epochs", 3));
    tc.lr = static_cast<float>(a.lr >= 0 ? a.lr : rc.get_float("train", "lr", 0.05));
    tc.batch_size =
        static_cast<int>(a.batch >= 0 ? a.batch : rc.get_int("train", "batch_size", 16));
    tc.seed = a.seed_set ? a.seed
                         : static_cast<uint64_t>(rc.get_int("train", "seed",
                                                            static_cast<long>(env_default_seed())));

    const ModelSpec& spec = spec_by_name(spec_name);
    const LabeledDataset ds = load_dataset(data);
    const TrainReport report = train_model(spec, ds, tc);
    save_checkpoint(report.model, out);

    for (size_t e = 0; e < report.epoch_accuracy.size(); ++e)
        std::cout << "epoch " << e + 1 << ": train_accuracy=" << report.epoch_accuracy[e]
                  << " mean_loss=" << report.epoch_loss[e] << "\n";
    if (!test_data.empty()) {
        const EvalResult ev = evaluate(report.model, load_dataset(test_data));
        std::cout << "test_accuracy=" << ev.accuracy
                  << " mean_confidence=" << ev.mean_true_class_confidence << "\n";
    }
    std::cout << "checkpoint=" << out << " params=" << report.model.param_count() << "\n";
}

// ---- eval --------------------------------------------------------------------

void run_eval(const std::string& checkpoint, const std::string& data) {
    const Model model = load_checkpoint(checkpoint);
    const EvalResult ev = evaluate(model, load_dataset(data));
    std::cout << "model=" << model.name << " accuracy=" << ev.accuracy
              << " mean_confidence=" << ev.mean_true_class_confidence << "\n";
}

// ---- attack ------------------------------------------------------------------

struct AttackArgs {
    std::string config_path, checkpoint, image, method = "dar", out = ".";
    long label = -1;
    double epsilon = -1.0, alpha = -1.0;
    long steps = -1, size = -1, count = -1, smooth_kernel = -1, smooth_every = -1;
    long opa_samples = 0;
    uint64_t seed = 0;
    bool seed_set = false;
};

void run_attack(const AttackArgs& a) {
    const RunConfig rc = maybe_load_config(a.config_path);
    const Model model = load_checkpoint(a.checkpoint);
    const Tensor image = read_ppm(read_file(a.image));

    const std::string method = a.method.empty() ? rc.get("attack", "method", "dar") : a.method;
    const int label = static_cast<int>(a.label >= 0 ? a.label
                                                    : rc.get_int("attack", "label",
                                                                 predict(model, image)));
    const uint64_t seed =
        a.seed_set ? a.seed
                   : static_cast<uint64_t>(rc.get_int("attack", "seed",
                                                      static_cast<long>(env_default_seed())));

    SweepRecord rec;
    rec.image_id = 0;
    rec.model = model.name;
    rec.method = method;
    rec.is_white_box = true;
    AttackResult result;

    if (method == "dar") {
        DarConfig dc;
        dc.size = static_cast<int>(a.size >= 0 ? a.size : rc.get_int("dar", "size", 10));
        dc.count = static_cast<int>(a.count >= 0 ? a.count : rc.get_int("dar", "count", 1));
        dc.method = dar_method_from_name(rc.get("dar", "method", "pgd"));
        dc.epsilon = static_cast<float>(a.epsilon >= 0 ? a.epsilon
                                                       : rc.get_float("dar", "epsilon", 0.25));
        dc.alpha = static_cast<float>(a.alpha >= 0 ? a.alpha
                                                   : rc.get_float("dar", "alpha",
                                                                  dc.epsilon / 4.0));
        dc.steps = static_cast<int>(a.steps >= 0 ? a.steps : rc.get_int("dar", "steps", 40));
        dc.smooth_kernel = static_cast<int>(
            a.smooth_kernel >= 0 ? a.smooth_kernel : rc.get_int("dar", "smooth_kernel", 3));
        dc.smooth_every = static_cast<int>(
            a.smooth_every >= 0 ? a.smooth_every : rc.get_int("dar", "smooth_every", 1));
        const auto gains = rc.get_list("dar", "color_gains", {"1", "1", "1"});
        if (gains.size() != 3) throw ConfigError("dar.color_gains needs three values");
        for (int i = 0; i < 3; ++i) dc.color_gains[i] = std::stof(gains[i]);
        dc.seed = seed;

        const DarResult dar = craft_dar(model, image, label, dc);
        result = dar.attack;
        rec.size = dc.size;
        rec.count = dc.count;
        rec.method = dar_method_name(dc.method);
        rec.epsilon = dc.epsilon;
        for (const auto& r : dar.regions.regions)
            rec.centers.push_back({r.center_row, r.center_col});
    } else {
        AttackConfig ac;
        ac.epsilon = static_cast<float>(a.epsilon >= 0 ? a.epsilon
                                                       : rc.get_float("attack", "epsilon", 0.1));
        ac.alpha = static_cast<float>(a.alpha >= 0 ? a.alpha
                                                   : rc.get_float("attack", "alpha",
                                                                  ac.epsilon / 4.0));
        ac.steps = static_cast<int>(a.steps >= 0 ? a.steps : rc.get_int("attack", "steps", 40));
        ac.seed = seed;
        rec.epsilon = ac.epsilon;

        if (method == "fgsm") {
            ac.alpha = std::min(ac.alpha, ac.epsilon);
            result = fgsm(model, image, label, ac);
        } else if (method == "pgd") {
            result = pgd(model, image, label, ac);
        } else if (method == "uap") {
            result = uap_noise(image, ac);
            annotate_confidences(model, image, label, result);
        } else if (method == "opa") {
            OpaSearch search;
            const long samples =
                a.opa_samples > 0 ? a.opa_samples : rc.get_int("attack", "opa_samples", 0);
            if (samples > 0) {
                search.mode = OpaSearch::Mode::random;
                search.samples = static_cast<int>(samples);
                search.seed = seed;
            }
            const OpaResult opa =
                one_pixel_attack(model, image, label, opa_default_palette(image.dim(0)), search);
            result = opa.attack;
            rec.centers.push_back({opa.row, opa.col});
            rec.epsilon = 0.0f;
        } else {
            throw ConfigError("unknown attack method '" + method +
                              "' (valid: fgsm, pgd, uap, opa, dar)");
        }
    }

    rec.orig_conf = result.original_confidence;
    rec.adv_conf = result.adversarial_confidence;
    rec.decrease = rec.orig_conf - rec.adv_conf;

    std::error_code ec;
    fs::create_directories(a.out, ec);
    write_file((fs::path(a.out) / "adversarial.ppm").string(),
               write_ppm(result.adversarial));
    write_text((fs::path(a.out) / "record.jsonl").string(),
               to_jsonl(std::span<const SweepRecord>(&rec, 1)));
    std::cout << "method=" << rec.method << " label=" << label
              << " orig_conf=" << rec.orig_conf << " adv_conf=" << rec.adv_conf
              << " queries=" << result.queries << "\n";
}

// ---- sweep -------------------------------------------------------------------

struct SweepArgs {
    std::string config_path, out, method, model;
    long jobs = -1, size = -1, count = -1, image_count = -1;
    double epsilon = -1.0;
    uint64_t seed = 0;
    bool seed_set = false;
};

void run_sweep_cmd(const SweepArgs& a) {
    if (a.config_path.empty()) throw ConfigError("sweep: --config is required");
    const RunConfig rc = load_run_config(a.config_path);

    const auto ckpt_paths = rc.get_list("sweep", "checkpoints", {});
    if (ckpt_paths.size() < 2)
        throw ConfigError("sweep: [sweep] checkpoints needs at least two checkpoint paths");
    std::vector<Model> models;
    std::vector<std::pair<std::string, std::string>> checksums;
    for (const auto& path : ckpt_paths) {
        const auto bytes = read_file(path);
        checksums.emplace_back(path, std::to_string(crc32(bytes)));
        models.push_back(deserialize_checkpoint(bytes));
    }

    SweepConfig cfg;
    cfg.eval_models.clear();
    for (const auto& m : models) cfg.eval_models.push_back(m.name);
    cfg.source_model =
        !a.model.empty() ? a.model : rc.get("sweep", "source_model", models.front().name);

    if (a.size >= 0)
        cfg.sizes = {static_cast<int>(a.size)};
    else {
        cfg.sizes.clear();
        for (long s : rc.get_int_list("sweep", "sizes", {2, 6, 10, 14, 18}))
            cfg.sizes.push_back(static_cast<int>(s));
    }
    if (a.count >= 0)
        cfg.counts = {static_cast<int>(a.count)};
    else {
        cfg.counts.clear();
        for (long c : rc.get_int_list("sweep", "counts", {1, 2, 3, 4}))
            cfg.counts.push_back(static_cast<int>(c));
    }
    cfg.methods.clear();
    if (!a.method.empty())
        cfg.methods.push_back(dar_method_from_name(a.method));
    else
        for (const auto& m : rc.get_list("sweep", "methods", {"pgd", "uap"}))
            cfg.methods.push_back(dar_method_from_name(m));

    cfg.image_count = static_cast<size_t>(
        a.image_count >= 0 ? a.image_count : rc.get_int("sweep", "image_count", 100));
    cfg.global_seed =
        a.seed_set ? a.seed
                   : static_cast<uint64_t>(rc.get_int("sweep", "seed",
                                                      static_cast<long>(env_default_seed())));
    cfg.jobs = static_cast<int>(a.jobs >= 1 ? a.jobs : rc.get_int("sweep", "jobs", 1));
    cfg.dar.epsilon = static_cast<float>(
        a.epsilon >= 0 ? a.epsilon : rc.get_float("sweep", "epsilon", 0.25));
    cfg.dar.alpha = static_cast<float>(
        rc.get_float("sweep", "alpha", static_cast<double>(cfg.dar.epsilon) / 4.0));
    cfg.dar.steps = static_cast<int>(rc.get_int("sweep", "steps", 40));
    cfg.dar.smooth_kernel = static_cast<int>(rc.get_int("sweep", "smooth_kernel", 3));
    cfg.dar.smooth_every = static_cast<int>(rc.get_int("sweep", "smooth_every", 1));
    const auto gains = rc.get_list("sweep", "color_gains", {"1", "1", "1"});
    if (gains.size() != 3) throw ConfigError("sweep.color_gains needs three values");
    for (int i = 0; i < 3; ++i) cfg.dar.color_gains[i] = std::stof(gains[i]);
    cfg.soa_epsilon =
        static_cast<float>(rc.get_float("sweep", "soa_epsilon", 2.0 / 255.0));
    cfg.min_confidence =
        static_cast<float>(rc.get_float("sweep", "min_confidence", 0.5));

    const std::string data = rc.get("sweep", "data", "");
    if (data.empty()) throw ConfigError("sweep: [sweep] data is required");
    const LabeledDataset ds = load_dataset(data);

    const Model& source = [&]() -> const Model& {
        for (const auto& m : models)
            if (m.name == cfg.source_model) return m;
        throw ConfigError("sweep: source model '" + cfg.source_model +
                          "' is not among the loaded checkpoints");
    }();

    const auto ids = select_attack_images(source, ds, cfg.min_confidence, cfg.image_count);
    if (ids.empty()) throw std::runtime_error("sweep: no image passed the inclusion filter");

    SweepOutcome outcome = run_sweep(cfg, models, ds, ids);
    // comparator at the paper-convention budget and at the DAR budget
    auto soa_paper = run_soa(cfg, models, ds, ids, cfg.soa_epsilon);
    auto soa_matched = run_soa(cfg, models, ds, ids, cfg.dar.epsilon);

    std::vector<SweepRecord> all = outcome.records;
    all.insert(all.end(), soa_paper.begin(), soa_paper.end());
    all.insert(all.end(), soa_matched.begin(), soa_matched.end());

    SweepReport report = aggregate(all);

    std::error_code ec;
    fs::create_directories(a.out, ec);
    write_text((fs::path(a.out) / "records.jsonl").string(), to_jsonl(all));
    write_text((fs::path(a.out) / "report.csv").string(), emit_csv(report));
    write_text((fs::path(a.out) / "report.md").string(), emit_markdown(report));

    nlohmann::ordered_json meta;
    meta["seed"] = cfg.global_seed;
    meta["source_model"] = cfg.source_model;
    meta["eval_models"] = cfg.eval_models;
    meta["epsilon"] = cfg.dar.epsilon;
    meta["alpha"] = cfg.dar.alpha;
    meta["steps"] = cfg.dar.steps;
    meta["smooth_kernel"] = cfg.dar.smooth_kernel;
    meta["smooth_every"] = cfg.dar.smooth_every;
    meta["color_gains"] = cfg.dar.color_gains;
    meta["soa_epsilon"] = cfg.soa_epsilon;
    meta["min_confidence"] = cfg.min_confidence;
    meta["data"] = data;
    meta["images_requested"] = cfg.image_count;
    meta["images_used"] = ids.size();
    meta["skipped_items"] = outcome.skipped.size();
    auto cks = nlohmann::ordered_json::array();
    for (const auto& [path, crc] : checksums) cks.push_back({{"path", path}, {"crc32", crc}});
    meta["checkpoints"] = cks;
    write_text((fs::path(a.out) / "metadata.json").string(), meta.dump(2) + "\n");

    for (const auto& skip : outcome.skipped)
        std::cerr << "skipped image " << skip.image_id << " s=" << skip.size
                  << " n=" << skip.count << " method=" << skip.method << ": " << skip.message
                  << "\n";
    std::cout << "images=" << ids.size() << " records=" << all.size()
              << " skipped=" << outcome.skipped.size() << " out=" << a.out << "\n";
}

// ---- report ------------------------------------------------------------------

void run_report(const std::string& records_path, const std::string& format,
                const std::string& out) {
    if (format != "csv" && format != "markdown" && format != "both")
        throw ConfigError("report: --format must be csv, markdown or both");
    const auto records = parse_jsonl(read_text(records_path));
    if (records.empty()) throw std::runtime_error("report: no records in " + records_path);
    const SweepReport report = aggregate(records);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (format == "csv" || format == "both")
        write_text((fs::path(out) / "report.csv").string(), emit_csv(report));
    if (format == "markdown" || format == "both")
        write_text((fs::path(out) / "report.md").string(), emit_markdown(report));
    std::cout << "records=" << records.size() << " out=" << out << "\n";
}

// ---- gen-data ----------------------------------------------------------------

void run_gen_data(const std::string& out, long count, uint64_t seed) {
    if (count < 1) throw ConfigError("gen-data: --count must be >= 1");
    const LabeledDataset ds = make_synthetic_dataset(static_cast<size_t>(count), seed);
    write_dataset_idx(ds, out);
    std::cout << "images=" << ds.size() << " classes=" << ds.num_classes() << " out=" << out
              << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"darforge: distributed adversarial region toolkit"};
    app.set_help_all_flag("--help-all", "Print help for all subcommands");
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a victim model and write a checkpoint");
    train->add_option("--config", train_args.config_path, "Run configuration file");
    train->add_option("--spec", train_args.spec, "Model spec: dar_small, dar_medium, dar_large");
    train->add_option("--data", train_args.data,
                      "Dataset: synth:COUNT:SEED, an images.idx/labels.idx directory, or a "
                      ".bin CIFAR-10 batch");
    train->add_option("--test-data", train_args.test_data, "Held-out dataset to score");
    train->add_option("--out", train_args.out, "Checkpoint output path");
    train->add_option("--epochs", train_args.epochs, "Training epochs")->capture_default_str();
    train->add_option("--lr", train_args.lr, "SGD learning rate")->capture_default_str();
    train->add_option("--batch-size", train_args.batch, "Minibatch size")->capture_default_str();
    auto* train_seed = train->add_option("--seed", train_args.seed, "Deterministic seed");
    train->callback([&] {
        train_args.seed_set = train_seed->count() > 0;
        run_train(train_args);
    });

    std::string eval_ckpt, eval_data;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint path")->required();
    eval->add_option("--data", eval_data, "Dataset spec")->required();
    eval->callback([&] { run_eval(eval_ckpt, eval_data); });

    AttackArgs attack_args;
    auto* attack = app.add_subcommand("attack", "Attack one PPM image with a chosen method");
    attack->add_option("--config", attack_args.config_path, "Run configuration file");
    attack->add_option("--checkpoint", attack_args.checkpoint, "Checkpoint path")->required();
    attack->add_option("--image", attack_args.image, "P6 PPM image path")->required();
    attack->add_option("--method", attack_args.method, "fgsm, pgd, uap, opa or dar")
        ->capture_default_str();
    attack->add_option("--label", attack_args.label,
                       "True class index (default: model prediction)");
    attack->add_option("--out", attack_args.out, "Output directory")->capture_default_str();
    attack->add_option("--epsilon", attack_args.epsilon, "L-inf budget");
    attack->add_option("--alpha", attack_args.alpha, "PGD step size");
    attack->add_option("--steps", attack_args.steps, "PGD iterations");
    attack->add_option("--size", attack_args.size, "DAR diameter");
    attack->add_option("--count", attack_args.count, "DAR region count");
    attack->add_option("--smooth-kernel", attack_args.smooth_kernel,
                       "DAR box-filter kernel (odd, 1 = off)");
    attack->add_option("--smooth-every", attack_args.smooth_every, "DAR smoothing cadence");
    attack->add_option("--opa-samples", attack_args.opa_samples,
                       "OPA random-search samples (0 = exhaustive)");
    auto* attack_seed = attack->add_option("--seed", attack_args.seed, "Deterministic seed");
    attack->callback([&] {
        attack_args.seed_set = attack_seed->count() > 0;
        run_attack(attack_args);
    });

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Run the full parameter sweep and transfer study");
    sweep->add_option("--config", sweep_args.config_path, "Run configuration file")->required();
    sweep->add_option("--out", sweep_args.out, "Output directory")->required();
    sweep->add_option("--jobs", sweep_args.jobs, "Worker threads (content-invariant)");
    sweep->add_option("--epsilon", sweep_args.epsilon, "Override DAR epsilon");
    sweep->add_option("--size", sweep_args.size, "Restrict the sweep to one DAR size");
    sweep->add_option("--count", sweep_args.count, "Restrict the sweep to one region count");
    sweep->add_option("--method", sweep_args.method, "Restrict the sweep to pgd or uap");
    sweep->add_option("--model", sweep_args.model, "Override the white-box source model");
    sweep->add_option("--image-count", sweep_args.image_count, "Number of filtered images");
    auto* sweep_seed = sweep->add_option("--seed", sweep_args.seed, "Deterministic seed");
    sweep->callback([&] {
        sweep_args.seed_set = sweep_seed->count() > 0;
        run_sweep_cmd(sweep_args);
    });

    std::string report_records, report_format = "both", report_out;
    auto* report = app.add_subcommand("report", "Re-render reports from a raw record log");
    report->add_option("--records", report_records, "records.jsonl path")->required();
    report->add_option("--format", report_format, "csv, markdown or both")
        ->capture_default_str();
    report->add_option("--out", report_out, "Output directory")->required();
    report->callback([&] { run_report(report_records, report_format, report_out); });

    std::string gen_out;
    long gen_count = 1000;
    uint64_t gen_seed = 0;
    auto* gen = app.add_subcommand("gen-data", "Write a synthetic IDX dataset");
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--count", gen_count, "Number of images")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Corpus seed")->capture_default_str();
    gen->callback([&] { run_gen_data(gen_out, gen_count, gen_seed); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help family
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const darforge::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IntegrityError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
