#include "darforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>

#include "darforge/errors.hpp"
#include "darforge/rng.hpp"

namespace darforge {

void LabeledDataset::validate() const {
    if (images.size() != labels.size())
        throw std::invalid_argument("dataset: image/label count mismatch");
    const int nc = num_classes();
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= nc)
            throw std::invalid_argument("dataset: label out of range at index " +
                                        std::to_string(i));
        for (size_t j = 0; j < images[i].size(); ++j) {
            const float v = images[i][j];
            if (!(v >= 0.0f && v <= 1.0f))
                throw std::invalid_argument("dataset: pixel outside [0,1] at image " +
                                            std::to_string(i));
        }
    }
}

namespace {

class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    size_t offset() const { return pos_; }
    size_t remaining() const { return bytes_.size() - pos_; }

    uint8_t u8(const char* what) {
        if (pos_ >= bytes_.size()) throw ParseError(std::string("truncated ") + what, pos_);
        return bytes_[pos_++];
    }

    uint32_t u32_be(const char* what) {
        if (remaining() < 4) throw ParseError(std::string("truncated ") + what, pos_);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v = (v << 8) | bytes_[pos_ + i];
        pos_ += 4;
        return v;
    }

    std::span<const uint8_t> take(size_t n, const char* what) {
        if (remaining() < n) throw ParseError(std::string("truncated ") + what, pos_);
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
};

// value*255 rounded half away from zero, clamped to [0, 255].
uint8_t quantize_u8(float v) {
    const double scaled = static_cast<double>(v) * 255.0;
    long r = std::lround(scaled); // rounds half away from zero
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    return static_cast<uint8_t>(r);
}

} // namespace

Tensor parse_idx(std::span<const uint8_t> bytes) {
    ByteReader r(bytes);
    if (bytes.empty()) throw ParseError("empty IDX stream", 0);
    const uint8_t z0 = r.u8("IDX magic");
    const uint8_t z1 = r.u8("IDX magic");
    const uint8_t type = r.u8("IDX magic");
    const uint8_t ndims = r.u8("IDX magic");
    if (z0 != 0 || z1 != 0)
        throw ParseError("bad IDX magic (leading bytes must be zero)", 0);
    if (type != 0x08)
        throw ParseError("unsupported IDX element type 0x" + std::to_string(type) +
                             " (only unsigned byte, 0x08)",
                         2);
    if (ndims < 1 || ndims > 4)
        throw ParseError("unsupported IDX rank " + std::to_string(ndims), 3);

    std::vector<int> shape;
    size_t expect = 1;
    for (int i = 0; i < ndims; ++i) {
        const uint32_t d = r.u32_be("IDX dimension");
        if (d == 0 || d > (1u << 24)) throw ParseError("IDX dimension out of range", r.offset() - 4);
        shape.push_back(static_cast<int>(d));
        expect *= d;
    }
    if (r.remaining() != expect)
        throw ParseError("IDX payload length mismatch: expected " + std::to_string(expect) +
                             " bytes, found " + std::to_string(r.remaining()),
                         r.offset());
    auto payload = r.take(expect, "IDX payload");
    Tensor t(shape);
    for (size_t i = 0; i < expect; ++i) t[i] = static_cast<float>(payload[i]) / 255.0f;
    return t;
}

std::vector<uint8_t> write_idx_u8(const Tensor& t) {
    if (t.rank() < 1 || t.rank() > 4)
        throw std::invalid_argument("write_idx_u8: rank must be 1..4");
    std::vector<uint8_t> out;
    out.reserve(4 + 4 * t.rank() + t.size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(0x08);
    out.push_back(static_cast<uint8_t>(t.rank()));
    for (size_t i = 0; i < t.rank(); ++i) {
        const uint32_t d = static_cast<uint32_t>(t.dim(i));
        out.push_back(static_cast<uint8_t>(d >> 24));
        out.push_back(static_cast<uint8_t>(d >> 16));
        out.push_back(static_cast<uint8_t>(d >> 8));
        out.push_back(static_cast<uint8_t>(d));
    }
    for (size_t i = 0; i < t.size(); ++i) out.push_back(quantize_u8(t[i]));
    return out;
}

std::vector<uint8_t> write_idx_labels(std::span<const int> labels) {
    std::vector<uint8_t> out;
    out.reserve(8 + labels.size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(0x08);
    out.push_back(1);
    const uint32_t n = static_cast<uint32_t>(labels.size());
    out.push_back(static_cast<uint8_t>(n >> 24));
    out.push_back(static_cast<uint8_t>(n >> 16));
    out.push_back(static_cast<uint8_t>(n >> 8));
    out.push_back(static_cast<uint8_t>(n));
    for (int l : labels) {
        if (l < 0 || l > 255) throw std::invalid_argument("write_idx_labels: label out of range");
        out.push_back(static_cast<uint8_t>(l));
    }
    return out;
}

static const char* kCifarNames[10] = {"airplane", "automobile", "bird",  "cat",  "deer",
                                      "dog",      "frog",       "horse", "ship", "truck"};

LabeledDataset parse_cifar10_batch(std::span<const uint8_t> bytes) {
    constexpr size_t kRecord = 3073; // 1 label byte + 3*32*32 pixels
    if (bytes.empty()) throw ParseError("empty CIFAR-10 stream", 0);
    if (bytes.size() % kRecord != 0)
        throw ParseError("CIFAR-10 stream length " + std::to_string(bytes.size()) +
                             " is not a multiple of 3073",
                         bytes.size() - bytes.size() % kRecord);
    LabeledDataset ds;
    ds.class_names.assign(kCifarNames, kCifarNames + 10);
    const size_t n = bytes.size() / kRecord;
    ds.images.reserve(n);
    ds.labels.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const size_t base = i * kRecord;
        const uint8_t label = bytes[base];
        if (label > 9)
            throw ParseError("CIFAR-10 label byte " + std::to_string(label) + " out of range",
                             base);
        Tensor img({3, 32, 32});
        for (size_t j = 0; j < 3072; ++j)
            img[j] = static_cast<float>(bytes[base + 1 + j]) / 255.0f;
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

LabeledDataset dataset_from_idx(std::span<const uint8_t> image_bytes,
                                std::span<const uint8_t> label_bytes,
                                std::vector<std::string> class_names) {
    Tensor images = parse_idx(image_bytes);
    Tensor labels = parse_idx(label_bytes);
    if (labels.rank() != 1) throw ParseError("label IDX must be rank 1", 3);
    if (images.rank() != 3 && images.rank() != 4)
        throw ParseError("image IDX must be rank 3 (N,H,W) or 4 (N,C,H,W)", 3);
    const int n = images.dim(0);
    if (n != labels.dim(0))
        throw ParseError("IDX pair mismatch: " + std::to_string(n) + " images vs " +
                             std::to_string(labels.dim(0)) + " labels",
                         0);

    LabeledDataset ds;
    const int C = images.rank() == 4 ? images.dim(1) : 1;
    const int H = images.rank() == 4 ? images.dim(2) : images.dim(1);
    const int W = images.rank() == 4 ? images.dim(3) : images.dim(2);
    const size_t stride = static_cast<size_t>(C) * H * W;
    int max_label = 0;
    for (int i = 0; i < n; ++i) {
        Tensor img({C, H, W});
        for (size_t j = 0; j < stride; ++j) img[j] = images[i * stride + j];
        ds.images.push_back(std::move(img));
        // labels arrive as value/255; recover the byte
        const int l = static_cast<int>(std::lround(labels[i] * 255.0));
        ds.labels.push_back(l);
        max_label = std::max(max_label, l);
    }
    if (class_names.empty())
        for (int c = 0; c <= max_label; ++c) class_names.push_back("class_" + std::to_string(c));
    ds.class_names = std::move(class_names);
    ds.validate();
    return ds;
}

LabeledDataset select_subset(const LabeledDataset& ds, size_t n, uint64_t seed) {
    if (n > ds.size())
        throw std::invalid_argument("select_subset: requested " + std::to_string(n) +
                                    " items from a dataset of " + std::to_string(ds.size()));
    // Per-class pools in dataset order, each shuffled with its own stream,
    // then drained round-robin in ascending label order.
    std::map<int, std::vector<size_t>> pools;
    for (size_t i = 0; i < ds.size(); ++i) pools[ds.labels[i]].push_back(i);
    for (auto& [label, pool] : pools) {
        Xoshiro256 rng(mix_seed(seed, static_cast<uint64_t>(label)));
        fisher_yates(pool, rng);
    }

    LabeledDataset out;
    out.class_names = ds.class_names;
    size_t round = 0;
    while (out.images.size() < n) {
        bool any = false;
        for (auto& [label, pool] : pools) {
            if (round < pool.size()) {
                any = true;
                if (out.images.size() < n) {
                    out.images.push_back(ds.images[pool[round]]);
                    out.labels.push_back(ds.labels[pool[round]]);
                }
            }
        }
        if (!any) break;
        ++round;
    }
    return out;
}

Tensor read_ppm(std::span<const uint8_t> bytes) {
    size_t pos = 0;
    auto peek = [&]() -> int { return pos < bytes.size() ? bytes[pos] : -1; };
    auto skip_space = [&]() {
        for (;;) {
            while (pos < bytes.size() && std::isspace(peek())) ++pos;
            if (peek() == '#') {
                while (pos < bytes.size() && peek() != '\n') ++pos;
            } else {
                return;
            }
        }
    };
    auto read_int = [&](const char* what) -> long {
        skip_space();
        if (pos >= bytes.size() || !std::isdigit(peek()))
            throw ParseError(std::string("expected integer for ") + what, pos);
        long v = 0;
        while (pos < bytes.size() && std::isdigit(peek())) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 1'000'000'000) throw ParseError(std::string(what) + " out of range", pos);
            ++pos;
        }
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
        throw ParseError("not a P6 pixmap", 0);
    pos = 2;
    const long w = read_int("width");
    const long h = read_int("height");
    const long maxval = read_int("maxval");
    if (w < 1 || h < 1) throw ParseError("bad pixmap dimensions", pos);
    if (maxval != 255) throw ParseError("unsupported maxval " + std::to_string(maxval), pos);
    if (pos >= bytes.size() || !std::isspace(peek()))
        throw ParseError("missing whitespace after maxval", pos);
    ++pos; // exactly one whitespace byte before the raster
    const size_t need = static_cast<size_t>(w) * h * 3;
    if (bytes.size() - pos < need)
        throw ParseError("truncated raster: need " + std::to_string(need) + " bytes, have " +
                             std::to_string(bytes.size() - pos),
                         pos);

    Tensor img({3, static_cast<int>(h), static_cast<int>(w)});
    for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    static_cast<float>(bytes[pos + (y * w + x) * 3 + c]) / 255.0f;
    return img;
}

std::vector<uint8_t> write_ppm(const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("write_ppm: 3-channel (3,H,W) tensor required");
    const int h = image.dim(1), w = image.dim(2);
    std::string header = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    std::vector<uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) out.push_back(quantize_u8(image.at(c, y, x)));
    return out;
}

namespace {

// Procedural shape renderer for the desk corpus. Ten classes of filled /
// outlined geometry with jittered placement, size, colors and noise.
void render_shape(Tensor& img, int cls, Xoshiro256& rng) {
    const int H = img.dim(1), W = img.dim(2);
    const float bg[3] = {rng.uniform(0.05f, 0.30f), rng.uniform(0.05f, 0.30f),
                         rng.uniform(0.05f, 0.30f)};
    const float fg[3] = {rng.uniform(0.55f, 0.95f), rng.uniform(0.55f, 0.95f),
                         rng.uniform(0.55f, 0.95f)};
    const int cy = H / 2 + static_cast<int>(rng.below(9)) - 4;
    const int cx = W / 2 + static_cast<int>(rng.below(9)) - 4;
    const int r = 6 + static_cast<int>(rng.below(5)); // 6..10

    auto inside = [&](int y, int x) -> bool {
        const int dy = y - cy, dx = x - cx;
        switch (cls) {
            case 0: return dy * dy + dx * dx <= r * r;                        // disk
            case 1: {                                                          // box outline
                const int m = std::max(std::abs(dy), std::abs(dx));
                return m <= r && m >= r - 2;
            }
            case 2: return std::abs(dy) <= r - 1 && std::abs(dx) <= r - 1;     // solid square
            case 3: return std::abs(dy) <= 1 || std::abs(dx) <= 1;             // cross
            case 4: {                                                          // ring
                const int d2 = dy * dy + dx * dx;
                return d2 <= r * r && d2 >= (r - 3) * (r - 3);
            }
            case 5: return ((y / 3) % 2) == 0;                                 // horizontal bars
            case 6: return ((x / 3) % 2) == 0;                                 // vertical bars
            case 7: return std::abs((y - x + 64) % 8) < 3;                     // diagonal stripes
            case 8: return (((y / 4) + (x / 4)) % 2) == 0;                     // checkerboard
            case 9: return dy >= -r / 2 && dy <= r / 2 &&                      // triangle
                           std::abs(dx) <= (dy + r / 2);
        }
        return false;
    };

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const bool fgp = inside(y, x);
            for (int c = 0; c < 3; ++c) {
                float v = (fgp ? fg[c] : bg[c]) + rng.symmetric(0.04f);
                img.at(c, y, x) = std::clamp(v, 0.0f, 1.0f);
            }
        }
}

} // namespace

LabeledDataset make_synthetic_dataset(size_t count, uint64_t seed, int height, int width) {
    static const char* kShapeNames[10] = {"disk",    "box",     "square",   "cross",
                                          "ring",    "hbars",   "vbars",    "diagonal",
                                          "checker", "triangle"};
    LabeledDataset ds;
    ds.class_names.assign(kShapeNames, kShapeNames + 10);
    ds.images.reserve(count);
    ds.labels.reserve(count);
    for (size_t i = 0; i < count; ++i) {
        const int cls = static_cast<int>(i % 10);
        Xoshiro256 rng(mix_seed(seed, i));
        Tensor img({3, height, width});
        render_shape(img, cls, rng);
        ds.images.push_back(std::move(img));
        ds.labels.push_back(cls);
    }
    return ds;
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                               std::istreambuf_iterator<char>());
    if (f.bad()) throw IoError("read failure: " + path);
    return bytes;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failure: " + path);
}

LabeledDataset load_dataset(const std::string& spec) {
    if (spec.rfind("synth:", 0) == 0) {
        const std::string rest = spec.substr(6);
        const size_t colon = rest.find(':');
        try {
            const size_t count = std::stoul(rest.substr(0, colon));
            const uint64_t seed =
                colon == std::string::npos ? 0 : std::stoull(rest.substr(colon + 1));
            return make_synthetic_dataset(count, seed);
        } catch (const std::logic_error&) {
            throw IoError("bad synthetic dataset spec (want synth:COUNT:SEED): " + spec);
        }
    }
    namespace fs = std::filesystem;
    if (fs::is_directory(spec)) {
        const auto img = read_file((fs::path(spec) / "images.idx").string());
        const auto lbl = read_file((fs::path(spec) / "labels.idx").string());
        return dataset_from_idx(img, lbl);
    }
    if (spec.size() > 4 && spec.substr(spec.size() - 4) == ".bin")
        return parse_cifar10_batch(read_file(spec));
    throw IoError("unrecognized dataset spec: " + spec +
                  " (want synth:COUNT:SEED, a directory with images.idx/labels.idx, or a "
                  ".bin CIFAR-10 batch)");
}

void write_dataset_idx(const LabeledDataset& ds, const std::string& dir) {
    if (ds.images.empty()) throw std::invalid_argument("write_dataset_idx: empty dataset");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    const int C = ds.images[0].dim(0), H = ds.images[0].dim(1), W = ds.images[0].dim(2);
    Tensor packed({static_cast<int>(ds.images.size()), C, H, W});
    const size_t stride = static_cast<size_t>(C) * H * W;
    for (size_t i = 0; i < ds.images.size(); ++i) {
        if (ds.images[i].size() != stride)
            throw std::invalid_argument("write_dataset_idx: ragged image shapes");
        for (size_t j = 0; j < stride; ++j) packed[i * stride + j] = ds.images[i][j];
    }
    write_file((fs::path(dir) / "images.idx").string(), write_idx_u8(packed));
    write_file((fs::path(dir) / "labels.idx").string(), write_idx_labels(ds.labels));
}

} // namespace darforge
