#include "oodkit/data_io.hpp"

#include "oodkit/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <string>

namespace oodkit {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::filesystem::path& path,
                          std::uint64_t offset) {
    std::array<unsigned char, 4> buf{};
    in.read(reinterpret_cast<char*>(buf.data()), 4);
    if (in.gcount() != 4) {
        throw FormatError(path.string() + ": truncated header at byte offset " +
                          std::to_string(offset));
    }
    return (std::uint32_t{buf[0]} << 24) | (std::uint32_t{buf[1]} << 16) |
           (std::uint32_t{buf[2]} << 8) | std::uint32_t{buf[3]};
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> buf{
        static_cast<unsigned char>((v >> 24) & 0xff), static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff), static_cast<unsigned char>(v & 0xff)};
    out.write(reinterpret_cast<const char*>(buf.data()), 4);
}

// 7x7 pixel-font glyphs for digits 0..9; '.'=off, 'X'=on.
constexpr std::array<std::array<const char*, 7>, 10> kGlyphs = {{
    {".XXXXX.",  //
     "X.....X",  //
     "X....XX",  //
     "X...X.X",  //
     "X..X..X",  //
     "XX....X",  //
     ".XXXXX."},
    {"...X...",  //
     "..XX...",  //
     "...X...",  //
     "...X...",  //
     "...X...",  //
     "...X...",  //
     ".XXXXX."},
    {".XXXXX.",  //
     "X.....X",  //
     "......X",  //
     "..XXXX.",  //
     ".X.....",  //
     "X......",  //
     "XXXXXXX"},
    {"XXXXXX.",  //
     "......X",  //
     "......X",  //
     "..XXXX.",  //
     "......X",  //
     "X.....X",  //
     ".XXXXX."},
    {"...XX..",  //
     "..X.X..",  //
     ".X..X..",  //
     "X...X..",  //
     "XXXXXXX",  //
     "....X..",  //
     "....X.."},
    {"XXXXXXX",  //
     "X......",  //
     "X......",  //
     "XXXXXX.",  //
     "......X",  //
     "X.....X",  //
     ".XXXXX."},
    {".XXXXX.",  //
     "X......",  //
     "X......",  //
     "XXXXXX.",  //
     "X.....X",  //
     "X.....X",  //
     ".XXXXX."},
    {"XXXXXXX",  //
     "......X",  //
     ".....X.",  //
     "....X..",  //
     "...X...",  //
     "..X....",  //
     "..X...."},
    {".XXXXX.",  //
     "X.....X",  //
     "X.....X",  //
     ".XXXXX.",  //
     "X.....X",  //
     "X.....X",  //
     ".XXXXX."},
    {".XXXXX.",  //
     "X.....X",  //
     "X.....X",  //
     ".XXXXXX",  //
     "......X",  //
     "X.....X",  //
     ".XXXXX."},
}};

// Bilinear lookup into a 7x7 glyph at fractional coordinates (row, col);
// outside the glyph reads as 0.
double glyph_at(int digit, double r, double c) {
    const auto& g = kGlyphs[static_cast<std::size_t>(digit)];
    const auto texel = [&](int ir, int ic) -> double {
        if (ir < 0 || ir >= 7 || ic < 0 || ic >= 7) return 0.0;
        return g[static_cast<std::size_t>(ir)][ic] == 'X' ? 1.0 : 0.0;
    };
    const int r0 = static_cast<int>(std::floor(r));
    const int c0 = static_cast<int>(std::floor(c));
    const double fr = r - r0;
    const double fc = c - c0;
    return texel(r0, c0) * (1 - fr) * (1 - fc) + texel(r0, c0 + 1) * (1 - fr) * fc +
           texel(r0 + 1, c0) * fr * (1 - fc) + texel(r0 + 1, c0 + 1) * fr * fc;
}

Vector unit_gaussian_direction(int dim, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v(i) = normal(rng);
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

}  // namespace

int LabeledDataset::n_classes() const {
    int max_label = -1;
    for (int y : labels) max_label = std::max(max_label, y);
    return max_label + 1;
}

void LabeledDataset::validate() const {
    if (labels.size() != static_cast<std::size_t>(samples.rows())) {
        throw DimensionError("dataset '" + name + "': " + std::to_string(samples.rows()) +
                             " samples but " + std::to_string(labels.size()) + " labels");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < -1) {
            throw ContractError("dataset '" + name + "': label " + std::to_string(labels[i]) +
                                " at index " + std::to_string(i) + " is below -1");
        }
    }
    if (range == ValueRange::unit && samples.size() > 0 &&
        (samples.minCoeff() < 0.0 || samples.maxCoeff() > 1.0)) {
        throw ContractError("dataset '" + name + "': values outside [0,1] despite unit range");
    }
}

LabeledDataset load_idx(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path) {
    std::ifstream in(images_path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + images_path.string());

    const std::uint32_t magic = read_u32_be(in, images_path, 0);
    if (magic != kImagesMagic) {
        throw FormatError(images_path.string() + ": bad magic at byte offset 0 (got 0x" +
                          [&] {
                              char buf[16];
                              std::snprintf(buf, sizeof buf, "%08x", magic);
                              return std::string(buf);
                          }() +
                          ", want 0x00000803)");
    }
    const std::uint32_t count = read_u32_be(in, images_path, 4);
    const std::uint32_t rows = read_u32_be(in, images_path, 8);
    const std::uint32_t cols = read_u32_be(in, images_path, 12);
    const std::uint64_t pixels = std::uint64_t{count} * rows * cols;

    std::vector<unsigned char> raw(pixels);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels));
    if (static_cast<std::uint64_t>(in.gcount()) != pixels) {
        throw FormatError(images_path.string() + ": payload truncated at byte offset " +
                          std::to_string(16 + in.gcount()) + " (expected " +
                          std::to_string(16 + pixels) + " bytes)");
    }

    LabeledDataset data;
    data.name = images_path.filename().string();
    data.samples.resize(count, std::int64_t{rows} * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        for (std::uint32_t j = 0; j < rows * cols; ++j) {
            data.samples(i, j) = raw[std::uint64_t{i} * rows * cols + j] / 255.0;
        }
    }
    data.labels.assign(count, -1);

    if (!labels_path.empty()) {
        std::ifstream lin(labels_path, std::ios::binary);
        if (!lin) throw FormatError("cannot open " + labels_path.string());
        const std::uint32_t lmagic = read_u32_be(lin, labels_path, 0);
        if (lmagic != kLabelsMagic) {
            throw FormatError(labels_path.string() +
                              ": bad magic at byte offset 0 (want 0x00000801)");
        }
        const std::uint32_t lcount = read_u32_be(lin, labels_path, 4);
        if (lcount != count) {
            throw FormatError(labels_path.string() + ": holds " + std::to_string(lcount) +
                              " labels but " + images_path.string() + " holds " +
                              std::to_string(count) + " images");
        }
        std::vector<unsigned char> lraw(count);
        lin.read(reinterpret_cast<char*>(lraw.data()), static_cast<std::streamsize>(count));
        if (static_cast<std::uint64_t>(lin.gcount()) != count) {
            throw FormatError(labels_path.string() + ": payload truncated at byte offset " +
                              std::to_string(8 + lin.gcount()));
        }
        for (std::uint32_t i = 0; i < count; ++i) data.labels[i] = lraw[i];
    }
    data.validate();
    return data;
}

void save_idx(const LabeledDataset& data, const std::filesystem::path& images_path,
              const std::filesystem::path& labels_path) {
    data.validate();
    const auto n = static_cast<std::uint32_t>(data.n());
    const auto dim = static_cast<std::uint32_t>(data.dim());

    // Square images when dim is a perfect square, else a 1 x dim raster.
    auto rows = static_cast<std::uint32_t>(std::lround(std::sqrt(static_cast<double>(dim))));
    std::uint32_t cols = 0;
    if (rows * rows == dim) {
        cols = rows;
    } else {
        rows = 1;
        cols = dim;
    }

    std::ofstream out(images_path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + images_path.string() + " for writing");
    write_u32_be(out, kImagesMagic);
    write_u32_be(out, n);
    write_u32_be(out, rows);
    write_u32_be(out, cols);
    std::vector<unsigned char> raw(std::uint64_t{n} * dim);
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < dim; ++j) {
            const double clamped = std::clamp(data.samples(i, j), 0.0, 1.0);
            raw[std::uint64_t{i} * dim + j] =
                static_cast<unsigned char>(std::lround(clamped * 255.0));
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw FormatError("short write to " + images_path.string());

    if (!labels_path.empty()) {
        for (std::size_t i = 0; i < data.labels.size(); ++i) {
            if (data.labels[i] < 0 || data.labels[i] > 255) {
                throw ContractError("label " + std::to_string(data.labels[i]) + " at index " +
                                    std::to_string(i) + " does not fit the unsigned-byte format");
            }
        }
        std::ofstream lout(labels_path, std::ios::binary);
        if (!lout) throw FormatError("cannot open " + labels_path.string() + " for writing");
        write_u32_be(lout, kLabelsMagic);
        write_u32_be(lout, n);
        for (int y : data.labels) lout.put(static_cast<char>(static_cast<unsigned char>(y)));
        if (!lout) throw FormatError("short write to " + labels_path.string());
    }
}

LabeledDataset gen_gaussian_noise(int n, int dim, Rng& rng, bool clamp) {
    if (n <= 0 || dim <= 0) throw ContractError("gen_gaussian_noise needs n > 0 and dim > 0");
    std::normal_distribution<double> normal(0.5, 1.0);
    LabeledDataset data;
    data.samples.resize(n, dim);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < dim; ++j) {
            const double v = normal(rng);
            data.samples(i, j) = clamp ? std::clamp(v, 0.0, 1.0) : v;
        }
    }
    data.labels.assign(static_cast<std::size_t>(n), -1);
    data.range = clamp ? ValueRange::unit : ValueRange::unbounded;
    data.name = "gaussian_noise";
    return data;
}

LabeledDataset gen_uniform_noise(int n, int dim, Rng& rng) {
    if (n <= 0 || dim <= 0) throw ContractError("gen_uniform_noise needs n > 0 and dim > 0");
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    LabeledDataset data;
    data.samples.resize(n, dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < dim; ++j) data.samples(i, j) = uniform(rng);
    data.labels.assign(static_cast<std::size_t>(n), -1);
    data.name = "uniform_noise";
    return data;
}

LabeledDataset gen_sphere_ood(int n, int dim, double radius, Rng& rng) {
    if (n <= 0 || dim <= 0) throw ContractError("gen_sphere_ood needs n > 0 and dim > 0");
    if (!(radius > 0.0)) throw ContractError("gen_sphere_ood needs radius > 0");
    LabeledDataset data;
    data.samples.resize(n, dim);
    for (int i = 0; i < n; ++i) {
        data.samples.row(i) = (radius * unit_gaussian_direction(dim, rng)).transpose();
    }
    data.labels.assign(static_cast<std::size_t>(n), -1);
    data.range = ValueRange::unbounded;
    data.name = "sphere_ood";
    return data;
}

LabeledDataset gen_toy3d(int n_per_class, Rng& rng) {
    if (n_per_class <= 0) throw ContractError("gen_toy3d needs n_per_class > 0");
    LabeledDataset data;
    data.samples.resize(2 * n_per_class, 3);
    data.labels.resize(static_cast<std::size_t>(2) * n_per_class);
    for (int i = 0; i < 2 * n_per_class; ++i) {
        Vector v = unit_gaussian_direction(3, rng).cwiseAbs();
        while (v.minCoeff() < 1e-9) v = unit_gaussian_direction(3, rng).cwiseAbs();
        const int label = i < n_per_class ? 0 : 1;
        data.samples.row(i) = (label == 0 ? v : Vector(-v)).transpose();
        data.labels[static_cast<std::size_t>(i)] = label;
    }
    data.range = ValueRange::unbounded;
    data.name = "toy3d";
    return data;
}

LabeledDataset gen_toy3d_offoctant(int n, Rng& rng) {
    if (n <= 0) throw ContractError("gen_toy3d_offoctant needs n > 0");
    LabeledDataset data;
    data.samples.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        while (true) {
            const Vector v = unit_gaussian_direction(3, rng);
            const bool all_pos = v.minCoeff() > 1e-9;
            const bool all_neg = v.maxCoeff() < -1e-9;
            const bool near_boundary = v.cwiseAbs().minCoeff() < 1e-9;
            if (!all_pos && !all_neg && !near_boundary) {
                data.samples.row(i) = v.transpose();
                break;
            }
        }
    }
    data.labels.assign(static_cast<std::size_t>(n), -1);
    data.range = ValueRange::unbounded;
    data.name = "toy3d_offoctant";
    return data;
}

LabeledDataset gen_synth_digits(int n, Rng& rng, int n_classes) {
    if (n <= 0) throw ContractError("gen_synth_digits needs n > 0");
    if (n_classes < 1 || n_classes > 10) {
        throw ContractError("gen_synth_digits supports 1..10 classes, got " +
                            std::to_string(n_classes));
    }
    constexpr int kSide = 28;
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> pixel_noise(0.0, 0.05);

    LabeledDataset data;
    data.samples.resize(n, kSide * kSide);
    data.labels.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int digit = i % n_classes;
        const double angle = (u01(rng) * 2.0 - 1.0) * 0.30;           // radians
        const double scale = 0.75 + u01(rng) * 0.40;                  // glyph size factor
        const double shift_r = (u01(rng) * 2.0 - 1.0) * 2.5;          // pixels
        const double shift_c = (u01(rng) * 2.0 - 1.0) * 2.5;          // pixels
        const double intensity = 0.65 + u01(rng) * 0.35;
        const double cos_a = std::cos(angle);
        const double sin_a = std::sin(angle);
        // Glyph cell (7x7) maps onto a 28x28 canvas: image pixel -> glyph
        // coordinate through the inverse of shift/rotate/scale about the
        // canvas center, so every parameter acts smoothly on the image.
        const double texels_per_pixel = 7.0 / (kSide * 0.82 * scale);
        for (int r = 0; r < kSide; ++r) {
            for (int c = 0; c < kSide; ++c) {
                const double yc = r - (kSide - 1) / 2.0 - shift_r;
                const double xc = c - (kSide - 1) / 2.0 - shift_c;
                const double gy = (cos_a * yc + sin_a * xc) * texels_per_pixel + 3.0;
                const double gx = (-sin_a * yc + cos_a * xc) * texels_per_pixel + 3.0;
                double v = intensity * glyph_at(digit, gy, gx) + pixel_noise(rng);
                data.samples(i, r * kSide + c) = std::clamp(v, 0.0, 1.0);
            }
        }
        data.labels[static_cast<std::size_t>(i)] = digit;
    }
    data.name = "synth_digits";
    return data;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data, double train_fraction,
                                                Rng& rng, std::vector<std::string>* warnings) {
    data.validate();
    if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) {
        throw ContractError("split fraction must lie in [0,1], got " +
                            std::to_string(train_fraction));
    }
    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < data.n(); ++i) by_class[data.labels[static_cast<std::size_t>(i)]].push_back(i);

    std::vector<int> train_idx;
    std::vector<int> test_idx;
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 2 && warnings != nullptr) {
            warnings->push_back("class " + std::to_string(label) + " has only " +
                                std::to_string(idx.size()) + " sample(s); split is degenerate");
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto take = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<long>(take));
        test_idx.insert(test_idx.end(), idx.begin() + static_cast<long>(take), idx.end());
    }
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(test_idx.begin(), test_idx.end());

    const auto gather = [&](const std::vector<int>& idx, const char* suffix) {
        LabeledDataset part;
        part.samples.resize(static_cast<std::int64_t>(idx.size()), data.dim());
        part.labels.resize(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            part.samples.row(static_cast<std::int64_t>(k)) = data.samples.row(idx[k]);
            part.labels[k] = data.labels[static_cast<std::size_t>(idx[k])];
        }
        part.range = data.range;
        part.name = data.name.empty() ? suffix : data.name + "." + suffix;
        return part;
    };
    return {gather(train_idx, "train"), gather(test_idx, "test")};
}

LabeledDataset class_filter(const LabeledDataset& data, const std::set<int>& keep, bool relabel) {
    data.validate();
    if (keep.empty()) throw ContractError("class_filter needs a nonempty keep set");

    std::map<int, int> remap;
    if (relabel) {
        int next = 0;
        for (int label : keep) remap[label] = next++;
    }

    std::vector<int> idx;
    for (int i = 0; i < data.n(); ++i) {
        if (keep.contains(data.labels[static_cast<std::size_t>(i)])) idx.push_back(i);
    }
    if (idx.empty()) throw ContractError("class_filter removed every sample of '" + data.name + "'");

    LabeledDataset out;
    out.samples.resize(static_cast<std::int64_t>(idx.size()), data.dim());
    out.labels.resize(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) {
        out.samples.row(static_cast<std::int64_t>(k)) = data.samples.row(idx[k]);
        const int y = data.labels[static_cast<std::size_t>(idx[k])];
        out.labels[k] = relabel ? remap.at(y) : y;
    }
    out.range = data.range;
    out.name = data.name;
    return out;
}

LabeledDataset concat(const LabeledDataset& a, const LabeledDataset& b) {
    if (a.dim() != b.dim()) {
        throw DimensionError("concat: dim mismatch (" + std::to_string(a.dim()) + " vs " +
                             std::to_string(b.dim()) + ")");
    }
    LabeledDataset out;
    out.samples.resize(a.n() + b.n(), a.dim());
    out.samples.topRows(a.n()) = a.samples;
    out.samples.bottomRows(b.n()) = b.samples;
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.range = (a.range == ValueRange::unit && b.range == ValueRange::unit) ? ValueRange::unit
                                                                             : ValueRange::unbounded;
    out.name = a.name + "+" + b.name;
    return out;
}

double max_row_norm(const LabeledDataset& data) {
    return data.n() == 0 ? 0.0 : data.samples.rowwise().norm().maxCoeff();
}

Matrix one_hot(const std::vector<int>& labels, int n_classes) {
    if (n_classes <= 0) throw ContractError("one_hot needs n_classes > 0");
    Matrix out = Matrix::Zero(static_cast<std::int64_t>(labels.size()), n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        if (y < 0 || y >= n_classes) {
            throw ContractError("one_hot label " + std::to_string(y) + " at index " +
                                std::to_string(i) + " outside [0," + std::to_string(n_classes) +
                                ")");
        }
        out(static_cast<std::int64_t>(i), y) = 1.0;
    }
    return out;
}

}  // namespace oodkit
