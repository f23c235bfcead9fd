#include "darforge/model_zoo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "darforge/errors.hpp"
#include "darforge/rng.hpp"

namespace darforge {

size_t ModelSpec::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

std::vector<ModelSpec> canonical_specs() {
    std::vector<ModelSpec> specs;

    // dar_small, 51,082 params: two conv blocks.
    {
        ModelSpec s;
        s.name = "dar_small";
        s.input_shape = {3, 32, 32};
        s.num_classes = 10;
        s.layers = {
            Layer::conv2d(3, 8, 3, 1, 1),  Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::conv2d(8, 16, 3, 1, 1), Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::flatten(),
            Layer::dense(16 * 8 * 8, 48),  Layer::relu(),
            Layer::dense(48, 10),
            Layer::softmax_xent(),
        };
        specs.push_back(std::move(s));
    }

    // dar_medium, 193,466 params: three wider conv blocks, average-pooled tail.
    {
        ModelSpec s;
        s.name = "dar_medium";
        s.input_shape = {3, 32, 32};
        s.num_classes = 10;
        s.layers = {
            Layer::conv2d(3, 16, 3, 1, 1),  Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::conv2d(16, 32, 3, 1, 1), Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::conv2d(32, 48, 3, 1, 1), Layer::relu(), Layer::avgpool2d(2, 2),
            Layer::flatten(),
            Layer::dense(48 * 4 * 4, 224),  Layer::relu(),
            Layer::dense(224, 10),
            Layer::softmax_xent(),
        };
        specs.push_back(std::move(s));
    }

    // dar_large, 513,458 params: four conv layers (stacked first block) and
    // an extra dense layer.
    {
        ModelSpec s;
        s.name = "dar_large";
        s.input_shape = {3, 32, 32};
        s.num_classes = 10;
        s.layers = {
            Layer::conv2d(3, 24, 3, 1, 1),  Layer::relu(),
            Layer::conv2d(24, 24, 3, 1, 1), Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::conv2d(24, 48, 3, 1, 1), Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::conv2d(48, 64, 3, 1, 1), Layer::relu(), Layer::maxpool2d(2, 2),
            Layer::flatten(),
            Layer::dense(64 * 4 * 4, 384),  Layer::relu(),
            Layer::dense(384, 192),         Layer::relu(),
            Layer::dense(192, 10),
            Layer::softmax_xent(),
        };
        specs.push_back(std::move(s));
    }

    return specs;
}

std::vector<std::string> canonical_spec_names() {
    std::vector<std::string> names;
    for (const auto& s : canonical_specs()) names.push_back(s.name);
    return names;
}

const ModelSpec& spec_by_name(const std::string& name) {
    static const std::vector<ModelSpec> specs = canonical_specs();
    for (const auto& s : specs)
        if (s.name == name) return s;
    std::string valid;
    for (const auto& s : specs) valid += (valid.empty() ? "" : ", ") + s.name;
    throw std::invalid_argument("unknown model spec '" + name + "' (valid: " + valid + ")");
}

Model instantiate(const ModelSpec& spec, uint64_t seed) {
    Model m;
    m.name = spec.name;
    m.input_shape = spec.input_shape;
    m.num_classes = spec.num_classes;
    m.layers = spec.layers;
    size_t param_layer = 0;
    for (auto& l : m.layers) {
        if (!l.has_params()) continue;
        const int fan_in = l.kind == LayerKind::conv2d
                               ? l.in_channels * l.kernel * l.kernel
                               : l.in_dim;
        const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
        Xoshiro256 rng(mix_seed(seed, param_layer++));
        for (size_t i = 0; i < l.weight.size(); ++i) l.weight[i] = rng.symmetric(limit);
        // biases stay zero
    }
    m.validate();
    return m;
}

TrainReport train_model(const ModelSpec& spec, const LabeledDataset& dataset,
                        const TrainConfig& cfg) {
    if (dataset.size() == 0) throw std::invalid_argument("train_model: empty dataset");
    if (cfg.epochs < 1) throw std::invalid_argument("train_model: epochs must be >= 1");
    if (cfg.lr <= 0.0f) throw std::invalid_argument("train_model: lr must be positive");
    if (cfg.batch_size < 1) throw std::invalid_argument("train_model: batch_size must be >= 1");

    TrainReport report;
    report.model = instantiate(spec, mix_seed(cfg.seed, 0x1717));

    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Xoshiro256 shuffle_rng(mix_seed(cfg.seed, 0x5E5E + static_cast<uint64_t>(epoch)));
        fisher_yates(order, shuffle_rng);

        size_t correct = 0;
        double loss_sum = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<Tensor> batch;
            std::vector<int> labels;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) {
                batch.push_back(dataset.images[order[i]]);
                labels.push_back(dataset.labels[order[i]]);
            }
            // running train accuracy, measured before the update
            for (size_t i = start; i < end; ++i)
                if (predict(report.model, dataset.images[order[i]]) == dataset.labels[order[i]])
                    ++correct;
            loss_sum += train_step(report.model, batch, labels, cfg.lr);
            ++batches;
        }
        report.epoch_accuracy.push_back(static_cast<float>(correct) /
                                        static_cast<float>(dataset.size()));
        report.epoch_loss.push_back(static_cast<float>(loss_sum / static_cast<double>(batches)));
    }
    return report;
}

EvalResult evaluate(const Model& model, const LabeledDataset& dataset) {
    if (dataset.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
    size_t correct = 0;
    double conf_sum = 0.0;
    for (size_t i = 0; i < dataset.size(); ++i) {
        const Tensor p = forward(model, dataset.images[i]);
        const int label = dataset.labels[i];
        if (label < 0 || label >= static_cast<int>(p.size()))
            throw std::invalid_argument("evaluate: label out of range");
        int best = 0;
        for (int c = 1; c < static_cast<int>(p.size()); ++c)
            if (p[c] > p[best]) best = c;
        if (best == label) ++correct;
        conf_sum += p[label];
    }
    EvalResult r;
    r.accuracy = static_cast<float>(correct) / static_cast<float>(dataset.size());
    r.mean_true_class_confidence =
        static_cast<float>(conf_sum / static_cast<double>(dataset.size()));
    return r;
}

// -- checkpoint --------------------------------------------------------------

uint32_t crc32(std::span<const uint8_t> bytes) {
    static const auto table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    uint32_t crc = 0xFFFFFFFFu;
    for (uint8_t b : bytes) crc = table[(crc ^ b) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

namespace {

constexpr char kMagic[4] = {'D', 'A', 'R', 'W'};
constexpr uint32_t kVersion = 1;

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_f32(std::vector<uint8_t>& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
}

class CheckpointReader {
public:
    explicit CheckpointReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    size_t offset() const { return pos_; }

    std::span<const uint8_t> take(size_t n, const char* field) {
        if (bytes_.size() - pos_ < n)
            throw IntegrityError(field, "truncated at byte " + std::to_string(pos_));
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    uint32_t u32(const char* field) {
        auto s = take(4, field);
        return static_cast<uint32_t>(s[0]) | static_cast<uint32_t>(s[1]) << 8 |
               static_cast<uint32_t>(s[2]) << 16 | static_cast<uint32_t>(s[3]) << 24;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
};

} // namespace

std::vector<uint8_t> serialize_checkpoint(const Model& model) {
    std::vector<uint8_t> out(kMagic, kMagic + 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<uint32_t>(model.name.size()));
    out.insert(out.end(), model.name.begin(), model.name.end());

    std::vector<const Tensor*> tensors;
    for (const auto& l : model.layers) {
        if (!l.has_params()) continue;
        tensors.push_back(&l.weight);
        tensors.push_back(&l.bias);
    }
    put_u32(out, static_cast<uint32_t>(tensors.size()));

    std::vector<uint8_t> payload;
    for (const Tensor* t : tensors) {
        put_u32(out, static_cast<uint32_t>(t->rank()));
        for (size_t i = 0; i < t->rank(); ++i) put_u32(out, static_cast<uint32_t>(t->dim(i)));
        for (size_t i = 0; i < t->size(); ++i) {
            put_f32(out, (*t)[i]);
            put_f32(payload, (*t)[i]);
        }
    }
    put_u32(out, crc32(payload));
    return out;
}

Model deserialize_checkpoint(std::span<const uint8_t> bytes) {
    CheckpointReader r(bytes);
    auto magic = r.take(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0)
        throw IntegrityError("magic", "expected \"DARW\"");
    const uint32_t version = r.u32("version");
    if (version != kVersion)
        throw IntegrityError("version", "unsupported version " + std::to_string(version));

    const uint32_t name_len = r.u32("name");
    if (name_len > 256) throw IntegrityError("name", "implausible length");
    auto name_bytes = r.take(name_len, "name");
    const std::string name(name_bytes.begin(), name_bytes.end());

    const ModelSpec& spec = [&]() -> const ModelSpec& {
        try {
            return spec_by_name(name);
        } catch (const std::invalid_argument& e) {
            throw IntegrityError("name", e.what());
        }
    }();

    Model model;
    model.name = spec.name;
    model.input_shape = spec.input_shape;
    model.num_classes = spec.num_classes;
    model.layers = spec.layers;

    std::vector<Tensor*> tensors;
    for (auto& l : model.layers) {
        if (!l.has_params()) continue;
        tensors.push_back(&l.weight);
        tensors.push_back(&l.bias);
    }

    const uint32_t tensor_count = r.u32("tensor count");
    if (tensor_count != tensors.size())
        throw IntegrityError("tensor count", "expected " + std::to_string(tensors.size()) +
                                                 ", found " + std::to_string(tensor_count));

    std::vector<uint8_t> payload;
    for (Tensor* t : tensors) {
        const uint32_t rank = r.u32("tensor rank");
        if (rank != t->rank())
            throw IntegrityError("tensor rank", "expected " + std::to_string(t->rank()));
        for (size_t d = 0; d < rank; ++d) {
            const uint32_t dim = r.u32("tensor shape");
            if (dim != static_cast<uint32_t>(t->dim(d)))
                throw IntegrityError("tensor shape", "mismatch against spec " + model.name);
        }
        auto raw = r.take(t->size() * 4, "tensor payload");
        payload.insert(payload.end(), raw.begin(), raw.end());
        for (size_t i = 0; i < t->size(); ++i) {
            const uint32_t bits = static_cast<uint32_t>(raw[i * 4]) |
                                  static_cast<uint32_t>(raw[i * 4 + 1]) << 8 |
                                  static_cast<uint32_t>(raw[i * 4 + 2]) << 16 |
                                  static_cast<uint32_t>(raw[i * 4 + 3]) << 24;
            float f;
            std::memcpy(&f, &bits, 4);
            (*t)[i] = f;
        }
    }

    const uint32_t stored = r.u32("checksum");
    const uint32_t computed = crc32(payload);
    if (stored != computed)
        throw IntegrityError("checksum", "stored " + std::to_string(stored) + ", computed " +
                                             std::to_string(computed));
    if (!r.at_end())
        throw IntegrityError("trailer", std::to_string(bytes.size() - r.offset()) +
                                            " unexpected trailing bytes");
    return model;
}

void save_checkpoint(const Model& model, const std::string& path) {
    const auto bytes = serialize_checkpoint(model);
    write_file(path, bytes);
}

Model load_checkpoint(const std::string& path) {
    const auto bytes = read_file(path);
    return deserialize_checkpoint(bytes);
}

} // namespace darforge
