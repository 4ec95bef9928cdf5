#include "oodkit/ood_batch.hpp"

#include "oodkit/error.hpp"

#include <array>
#include <bit>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace oodkit {

namespace {

constexpr char kBlobMagic[4] = {'O', 'O', 'D', 'B'};
constexpr std::uint32_t kBlobVersion = 1;

void write_u64(std::ostream& os, std::uint64_t v) {
    std::array<char, 8> buf;
    for (int i = 0; i < 8; ++i) buf[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf.data(), 8);
}

std::uint64_t read_u64(std::istream& is, const std::filesystem::path& path) {
    std::array<char, 8> buf;
    is.read(buf.data(), 8);
    if (is.gcount() != 8) {
        throw FormatError(path.string() + ": truncated at byte offset " +
                          std::to_string(static_cast<long long>(is.tellg())));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

}  // namespace

std::string to_string(OodType t) { return t == OodType::type1 ? "I" : "II"; }

OodType ood_type_from_string(const std::string& s) {
    if (s == "I") return OodType::type1;
    if (s == "II") return OodType::type2;
    throw FormatError("unknown OOD type '" + s + "' (want I or II)");
}

void OodBatch::validate() const {
    const auto n = static_cast<std::size_t>(samples.rows());
    if (types.size() != n || source_class.size() != n || beta.size() != n ||
        source_index.size() != n) {
        throw DimensionError("ood batch metadata length mismatch: " + std::to_string(n) +
                             " samples vs " + std::to_string(types.size()) + " types, " +
                             std::to_string(source_class.size()) + " classes, " +
                             std::to_string(beta.size()) + " betas, " +
                             std::to_string(source_index.size()) + " source indices");
    }
}

LabeledDataset OodBatch::as_dataset(const std::string& name) const {
    validate();
    LabeledDataset data;
    data.samples = samples;
    data.labels.assign(static_cast<std::size_t>(n()), -1);
    const bool unit = n() > 0 && samples.minCoeff() >= 0.0 && samples.maxCoeff() <= 1.0;
    data.range = unit ? ValueRange::unit : ValueRange::unbounded;
    data.name = name;
    return data;
}

OodBatch concat(const OodBatch& a, const OodBatch& b) {
    a.validate();
    b.validate();
    if (a.n() > 0 && b.n() > 0 && a.dim() != b.dim()) {
        throw DimensionError("ood batch concat: dim mismatch (" + std::to_string(a.dim()) +
                             " vs " + std::to_string(b.dim()) + ")");
    }
    OodBatch out;
    out.samples.resize(a.n() + b.n(), a.n() > 0 ? a.dim() : b.dim());
    if (a.n() > 0) out.samples.topRows(a.n()) = a.samples;
    if (b.n() > 0) out.samples.bottomRows(b.n()) = b.samples;
    const auto append = [](auto& dst, const auto& x, const auto& y) {
        dst = x;
        dst.insert(dst.end(), y.begin(), y.end());
    };
    append(out.types, a.types, b.types);
    append(out.source_class, a.source_class, b.source_class);
    append(out.beta, a.beta, b.beta);
    append(out.source_index, a.source_index, b.source_index);
    append(out.warnings, a.warnings, b.warnings);
    return out;
}

void save_ood_batch(const OodBatch& batch, const std::filesystem::path& prefix) {
    batch.validate();
    const std::string base = prefix.string();

    {
        std::ofstream os(base + ".f64", std::ios::binary);
        if (!os) throw FormatError("cannot open " + base + ".f64 for writing");
        os.write(kBlobMagic, 4);
        write_u64(os, kBlobVersion);
        write_u64(os, static_cast<std::uint64_t>(batch.samples.rows()));
        write_u64(os, static_cast<std::uint64_t>(batch.samples.cols()));
        for (Eigen::Index i = 0; i < batch.samples.rows(); ++i) {
            for (Eigen::Index j = 0; j < batch.samples.cols(); ++j) {
                const auto bits = std::bit_cast<std::uint64_t>(batch.samples(i, j));
                write_u64(os, bits);
            }
        }
        if (!os) throw FormatError("short write to " + base + ".f64");
    }

    if (batch.n() > 0) save_idx(batch.as_dataset("ood"), base + ".idx");

    std::ofstream csv(base + ".manifest.csv");
    if (!csv) throw FormatError("cannot open " + base + ".manifest.csv for writing");
    csv << "index,type,beta,source_class\n";
    for (int i = 0; i < batch.n(); ++i) {
        char beta_buf[40];
        std::snprintf(beta_buf, sizeof beta_buf, "%.17g", batch.beta[static_cast<std::size_t>(i)]);
        csv << batch.source_index[static_cast<std::size_t>(i)] << ','
            << to_string(batch.types[static_cast<std::size_t>(i)]) << ',' << beta_buf << ','
            << batch.source_class[static_cast<std::size_t>(i)] << '\n';
    }
    if (!csv) throw FormatError("short write to " + base + ".manifest.csv");
}

OodBatch load_ood_batch(const std::filesystem::path& prefix) {
    const std::string base = prefix.string();
    OodBatch batch;

    {
        const std::filesystem::path blob = base + ".f64";
        std::ifstream is(blob, std::ios::binary);
        if (!is) throw FormatError("cannot open " + blob.string());
        char magic[4];
        is.read(magic, 4);
        if (is.gcount() != 4 || std::string(magic, 4) != std::string(kBlobMagic, 4)) {
            throw FormatError(blob.string() + ": bad magic at byte offset 0");
        }
        const std::uint64_t version = read_u64(is, blob);
        if (version != kBlobVersion) {
            throw FormatError(blob.string() + ": unsupported version " + std::to_string(version));
        }
        const std::uint64_t rows = read_u64(is, blob);
        const std::uint64_t cols = read_u64(is, blob);
        batch.samples.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (std::uint64_t i = 0; i < rows; ++i) {
            for (std::uint64_t j = 0; j < cols; ++j) {
                batch.samples(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    std::bit_cast<double>(read_u64(is, blob));
            }
        }
    }

    const std::filesystem::path manifest = base + ".manifest.csv";
    std::ifstream csv(manifest);
    if (!csv) throw FormatError("cannot open " + manifest.string());
    std::string line;
    if (!std::getline(csv, line) || line != "index,type,beta,source_class") {
        throw FormatError(manifest.string() + ": bad header row '" + line + "'");
    }
    std::size_t row = 1;
    while (std::getline(csv, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string idx_s, type_s, beta_s, class_s;
        if (!std::getline(fields, idx_s, ',') || !std::getline(fields, type_s, ',') ||
            !std::getline(fields, beta_s, ',') || !std::getline(fields, class_s)) {
            throw FormatError(manifest.string() + ": malformed row " + std::to_string(row));
        }
        try {
            batch.source_index.push_back(std::stoi(idx_s));
            batch.types.push_back(ood_type_from_string(type_s));
            batch.beta.push_back(std::stod(beta_s));
            batch.source_class.push_back(std::stoi(class_s));
        } catch (const std::invalid_argument&) {
            throw FormatError(manifest.string() + ": unparsable number in row " +
                              std::to_string(row));
        }
    }
    batch.validate();
    return batch;
}

}  // namespace oodkit
