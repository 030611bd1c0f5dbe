#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wad/dataset.hpp"
#include "wad/error.hpp"
#include "wad/repr_core.hpp"
#include "wad/student.hpp"

namespace wad {

// WADE v1:  "WADE" | u32 version | u64 count | u32 dim | u8 dtype | count*dim f32
// WADC v1:  "WADC" | u32 version | u32 input_dim | u32 n_hidden | u32 hidden[n_hidden]
//           | u32 num_classes | u8 activation | u64 n_params | n_params f64
// All integers and floats little-endian.

inline constexpr std::array<char, 4> kEmbeddingMagic{'W', 'A', 'D', 'E'};
inline constexpr std::array<char, 4> kCheckpointMagic{'W', 'A', 'D', 'C'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 0;
inline constexpr std::size_t kEmbeddingHeaderSize = 4 + 4 + 8 + 4 + 1;
inline constexpr double kLoadNormTolerance = 1e-4;
inline constexpr char kSidecarHeader[] = "index,role,label,ground_truth,is_target";

namespace detail {

class ByteWriter {
public:
    template <typename T>
    void put_le(T value) {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
        const U bits = std::bit_cast<U>(value);
        for (std::size_t b = 0; b < sizeof(U); ++b) bytes_.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    void put_magic(const std::array<char, 4>& magic) {
        for (char c : magic) bytes_.push_back(static_cast<std::uint8_t>(c));
    }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T get_le() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                                     std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
        require(sizeof(U));
        U bits = 0;
        for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(bytes_[pos_ + b]) << (8 * b);
        pos_ += sizeof(U);
        return std::bit_cast<T>(bits);
    }
    bool magic_is(const std::array<char, 4>& magic) {
        require(4);
        const bool ok = std::equal(magic.begin(), magic.end(), bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                   [](char c, std::uint8_t b) { return static_cast<std::uint8_t>(c) == b; });
        pos_ += 4;
        return ok;
    }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void require(std::size_t n) const {
        if (remaining() < n) throw Error(ErrorCode::TruncatedPayload, "unexpected end of data");
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to '" + path + "'");
}

}  // namespace detail

// --- embeddings -------------------------------------------------------------

/// Serializes to WADE v1. Values are stored as 32-bit floats.
inline std::vector<std::uint8_t> encode_embeddings(std::span<const UnitEmbedding> embeddings) {
    if (embeddings.empty()) throw Error(ErrorCode::InvalidInputs, "nothing to write");
    const std::size_t dim = common_dimension(embeddings);
    detail::ByteWriter w;
    w.put_magic(kEmbeddingMagic);
    w.put_le(kFormatVersion);
    w.put_le(static_cast<std::uint64_t>(embeddings.size()));
    w.put_le(static_cast<std::uint32_t>(dim));
    w.put_le(kDtypeFloat32);
    for (const auto& e : embeddings) {
        for (double v : e.values()) w.put_le(static_cast<float>(v));
    }
    return w.take();
}

/// Parses WADE v1. Rows whose norm is off by more than 1e-6 (but within
/// 1e-4) are renormalized and reported through `warnings`.
inline std::vector<UnitEmbedding> decode_embeddings(std::span<const std::uint8_t> bytes,
                                                    std::vector<std::string>* warnings = nullptr) {
    if (bytes.size() < 4) throw Error(ErrorCode::BadMagic, "file too short for a WADE header");
    detail::ByteReader r(bytes);
    if (!r.magic_is(kEmbeddingMagic)) throw Error(ErrorCode::BadMagic, "expected 'WADE'");
    const auto version = r.get_le<std::uint32_t>();
    if (version != kFormatVersion) {
        throw Error(ErrorCode::UnsupportedVersion, "WADE version " + std::to_string(version));
    }
    const auto count = r.get_le<std::uint64_t>();
    const auto dim = r.get_le<std::uint32_t>();
    const auto dtype = r.get_le<std::uint8_t>();
    if (dtype != kDtypeFloat32) throw Error(ErrorCode::UnsupportedVersion, "dtype code " + std::to_string(dtype));
    if (dim == 0) throw Error(ErrorCode::DimensionMismatch, "header declares dimension 0");
    if (count > r.remaining() / 4 / dim || r.remaining() != count * dim * 4) {
        throw Error(ErrorCode::TruncatedPayload, "header declares " + std::to_string(count) + "x" +
                                                     std::to_string(dim) + " floats but payload has " +
                                                     std::to_string(r.remaining()) + " bytes");
    }
    std::vector<UnitEmbedding> out;
    out.reserve(count);
    std::vector<double> row(dim);
    for (std::uint64_t i = 0; i < count; ++i) {
        for (auto& v : row) v = static_cast<double>(r.get_le<float>());
        const double norm = euclidean_norm(row);
        if (!(std::abs(norm - 1.0) <= kLoadNormTolerance)) {
            throw Error(ErrorCode::NonUnitEmbedding, "row " + std::to_string(i) + " has norm " + std::to_string(norm));
        }
        if (std::abs(norm - 1.0) > kUnitNormTolerance) {
            if (warnings) warnings->push_back("row " + std::to_string(i) + " renormalized (norm " + std::to_string(norm) + ")");
            out.push_back(normalize(row));
        } else {
            out.push_back(UnitEmbedding::from_unit(row));
        }
    }
    return out;
}

inline void write_embeddings(const std::string& path, std::span<const UnitEmbedding> embeddings) {
    detail::write_file_bytes(path, encode_embeddings(embeddings));
}

inline std::vector<UnitEmbedding> read_embeddings(const std::string& path, std::vector<std::string>* warnings = nullptr) {
    return decode_embeddings(detail::read_file_bytes(path), warnings);
}

// --- label sidecar ----------------------------------------------------------

/// Parsed sidecar. Roles and visible labels are public; the ground-truth
/// columns sit behind `hidden_truth()` for evaluation code.
class LabelTable {
public:
    std::vector<Role> roles;
    std::vector<ClassId> labels;

    const HiddenTruth& hidden_truth() const noexcept { return truth_; }
    std::size_t size() const noexcept { return roles.size(); }

private:
    HiddenTruth truth_;
    friend LabelTable parse_labels(std::string_view, std::size_t);
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

inline std::optional<long long> parse_int(std::string_view s) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

}  // namespace detail

inline LabelTable parse_labels(std::string_view text, std::size_t expected_count) {
    LabelTable table;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t pos = 0;
    auto malformed = [&](const std::string& why) {
        throw Error(ErrorCode::MalformedRow, "line " + std::to_string(line_no) + ": " + why);
    };
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const auto line = detail::trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kSidecarHeader) malformed("expected header '" + std::string(kSidecarHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto fields = detail::split_commas(line);
        if (fields.size() != 5) malformed("expected 5 fields, found " + std::to_string(fields.size()));
        const auto index = detail::parse_int(fields[0]);
        const auto label = detail::parse_int(fields[2]);
        const auto truth = detail::parse_int(fields[3]);
        const auto flag = detail::parse_int(fields[4]);
        if (!index || *index < 0) malformed("bad index '" + std::string(fields[0]) + "'");
        if (!label) malformed("bad label '" + std::string(fields[2]) + "'");
        if (!truth || *truth < -1) malformed("bad ground_truth '" + std::string(fields[3]) + "'");
        if (!flag || *flag < -1 || *flag > 1) malformed("bad is_target '" + std::string(fields[4]) + "'");

        const std::size_t expected_index = table.roles.size();
        if (static_cast<std::size_t>(*index) != expected_index) {
            throw Error(ErrorCode::IndexGap, "line " + std::to_string(line_no) + ": expected index " +
                                                 std::to_string(expected_index) + ", found " + std::to_string(*index));
        }
        if (expected_index >= expected_count) {
            throw Error(ErrorCode::RowCountMismatch, "more than " + std::to_string(expected_count) + " rows");
        }
        Role role;
        if (fields[1] == "labeled") {
            role = Role::Labeled;
            if (*label < 0) malformed("labeled row needs a label >= 0");
        } else if (fields[1] == "unlabeled") {
            role = Role::Unlabeled;
            if (*label != -1) malformed("unlabeled row must carry label -1");
        } else if (fields[1] == "test") {
            role = Role::Test;
            if (*label < 0) malformed("test row needs a label >= 0");
        } else {
            malformed("unknown role '" + std::string(fields[1]) + "'");
        }
        table.roles.push_back(role);
        table.labels.push_back(static_cast<ClassId>(*label));
        table.truth_.label.push_back(static_cast<ClassId>(*truth));
        table.truth_.is_target.push_back(static_cast<std::int8_t>(*flag));
    }
    if (!header_seen) throw Error(ErrorCode::MalformedRow, "line 1: missing header");
    if (table.roles.size() != expected_count) {
        throw Error(ErrorCode::RowCountMismatch, "found " + std::to_string(table.roles.size()) + " rows, expected " +
                                                     std::to_string(expected_count));
    }
    return table;
}

inline LabelTable read_labels(const std::string& path, std::size_t expected_count) {
    const auto bytes = detail::read_file_bytes(path);
    return parse_labels(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), expected_count);
}

inline std::string format_labels(const DatasetState& state) {
    std::ostringstream out;
    out << kSidecarHeader << '\n';
    const auto& truth = state.truth_columns();
    for (std::size_t i = 0; i < state.size(); ++i) {
        out << i << ',' << to_string(state.role(i)) << ',' << state.label(i) << ','
            << (truth ? truth->label[i] : -1) << ',' << (truth ? static_cast<int>(truth->is_target[i]) : -1) << '\n';
    }
    return out.str();
}

inline void write_labels(const std::string& path, const DatasetState& state) {
    const auto text = format_labels(state);
    detail::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// --- datasets ---------------------------------------------------------------

inline void save_dataset(const DatasetState& state, const std::string& embeddings_path, const std::string& labels_path) {
    write_embeddings(embeddings_path, state.embeddings());
    write_labels(labels_path, state);
}

/// Class count is inferred as one more than the largest visible label.
inline DatasetState load_dataset(const std::string& embeddings_path, const std::string& labels_path,
                                 std::vector<std::string>* warnings = nullptr) {
    auto embeddings = read_embeddings(embeddings_path, warnings);
    const auto table = read_labels(labels_path, embeddings.size());
    int num_classes = 0;
    for (ClassId y : table.labels) num_classes = std::max(num_classes, y + 1);
    const auto& truth = table.hidden_truth();
    const bool any_truth = std::any_of(truth.is_target.begin(), truth.is_target.end(), [](std::int8_t f) { return f >= 0; });
    return DatasetState(std::move(embeddings), table.roles, table.labels, num_classes,
                        any_truth ? std::optional<HiddenTruth>(truth) : std::nullopt);
}

// --- checkpoints ------------------------------------------------------------

inline std::vector<std::uint8_t> encode_checkpoint(const StudentParams& params) {
    const auto& arch = params.arch;
    detail::ByteWriter w;
    w.put_magic(kCheckpointMagic);
    w.put_le(kFormatVersion);
    w.put_le(static_cast<std::uint32_t>(arch.input_dim));
    w.put_le(static_cast<std::uint32_t>(arch.hidden.size()));
    for (std::size_t h : arch.hidden) w.put_le(static_cast<std::uint32_t>(h));
    w.put_le(static_cast<std::uint32_t>(arch.num_classes));
    w.put_le(static_cast<std::uint8_t>(arch.activation));
    w.put_le(static_cast<std::uint64_t>(params.values.size()));
    for (double v : params.values) w.put_le(v);
    return w.take();
}

inline StudentParams decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw Error(ErrorCode::BadMagic, "file too short for a WADC header");
    detail::ByteReader r(bytes);
    if (!r.magic_is(kCheckpointMagic)) throw Error(ErrorCode::BadMagic, "expected 'WADC'");
    const auto version = r.get_le<std::uint32_t>();
    if (version != kFormatVersion) throw Error(ErrorCode::UnsupportedVersion, "WADC version " + std::to_string(version));
    Architecture arch;
    arch.input_dim = r.get_le<std::uint32_t>();
    const auto n_hidden = r.get_le<std::uint32_t>();
    if (n_hidden > r.remaining() / 4) throw Error(ErrorCode::TruncatedPayload, "hidden layer list truncated");
    for (std::uint32_t k = 0; k < n_hidden; ++k) arch.hidden.push_back(r.get_le<std::uint32_t>());
    arch.num_classes = r.get_le<std::uint32_t>();
    const auto act = r.get_le<std::uint8_t>();
    if (act > 1) throw Error(ErrorCode::UnsupportedVersion, "activation code " + std::to_string(act));
    arch.activation = static_cast<Activation>(act);
    arch.validate();
    const auto n_params = r.get_le<std::uint64_t>();
    if (n_params != arch.parameter_count()) {
        throw Error(ErrorCode::InvariantViolation, "parameter count " + std::to_string(n_params) +
                                                       " does not match architecture");
    }
    if (r.remaining() != n_params * 8) throw Error(ErrorCode::TruncatedPayload, "parameter payload size mismatch");
    StudentParams p = StudentParams::zeros(arch);
    for (double& v : p.values) v = r.get_le<double>();
    return p;
}

inline void write_checkpoint(const std::string& path, const StudentParams& params) {
    detail::write_file_bytes(path, encode_checkpoint(params));
}

inline StudentParams read_checkpoint(const std::string& path) {
    return decode_checkpoint(detail::read_file_bytes(path));
}

}  // namespace wad
