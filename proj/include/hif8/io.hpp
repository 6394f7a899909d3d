// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hif8/calibration.hpp"
#include "hif8/error.hpp"
#include "hif8/scaling.hpp"
#include "hif8/source_format.hpp"
#include "hif8/tensorops.hpp"

// File formats.
//
// Tensor file, little-endian throughout:
//
//   offset  size       field
//   0       4          magic "HF8T"
//   4       1          version (1)
//   5       1          dtype: 0 = FP32, 1 = HiF8 codes, 2 = FP16, 3 = BF16
//   6       1          rank (>= 1)
//   7       4 * rank   dims, u32 each, all >= 1
//   ...                payload, row-major, product(dims) * element size bytes
//
// Model manifests and calibration reports are JSON; event traces and
// timelines are CSV with LF line endings.

namespace hif8 {

enum class Dtype : std::uint8_t { FP32 = 0, HiF8 = 1, FP16 = 2, BF16 = 3 };

constexpr std::size_t elementSize(Dtype d)
{
    switch (d) {
    case Dtype::FP32: return 4;
    case Dtype::HiF8: return 1;
    case Dtype::FP16:
    case Dtype::BF16: return 2;
    }
    return 0;
}

/// Raw tensor file contents. Payload bytes are kept verbatim so that
/// serialize(parse(bytes)) == bytes for every valid file.
struct TensorFile {
    Dtype dtype = Dtype::FP32;
    std::vector<std::uint32_t> dims;
    std::vector<std::uint8_t> payload;

    friend bool operator==(const TensorFile&, const TensorFile&) = default;

    std::size_t elementCount() const
    {
        std::size_t n = 1;
        for (const auto d : dims) {
            n *= d;
        }
        return n;
    }
};

inline constexpr std::array<std::uint8_t, 4> kTensorMagic{'H', 'F', '8', 'T'};
inline constexpr std::uint8_t kTensorVersion = 1;

inline std::vector<std::uint8_t> serializeTensorFile(const TensorFile& f)
{
    if (f.dims.empty() || f.dims.size() > 255) {
        throw Error(ErrorKind::BadHeader, "rank must be in [1, 255]");
    }
    std::vector<std::uint8_t> out(kTensorMagic.begin(), kTensorMagic.end());
    out.push_back(kTensorVersion);
    out.push_back(static_cast<std::uint8_t>(f.dtype));
    out.push_back(static_cast<std::uint8_t>(f.dims.size()));
    for (const std::uint32_t d : f.dims) {
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<std::uint8_t>(d >> (8 * i)));
        }
    }
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

inline TensorFile parseTensorFile(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 4 || !std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin())) {
        throw Error(ErrorKind::BadMagic, "expected \"HF8T\"");
    }
    if (bytes.size() < 7) {
        throw Error(ErrorKind::TruncatedPayload, "header shorter than 7 bytes");
    }
    if (bytes[4] != kTensorVersion) {
        throw Error(ErrorKind::BadVersion, "version " + std::to_string(bytes[4]));
    }
    if (bytes[5] > 3) {
        throw Error(ErrorKind::BadHeader, "unknown dtype " + std::to_string(bytes[5]));
    }
    TensorFile f;
    f.dtype = static_cast<Dtype>(bytes[5]);
    const std::size_t rank = bytes[6];
    if (rank == 0) {
        throw Error(ErrorKind::BadHeader, "rank 0");
    }
    const std::size_t headerSize = 7 + 4 * rank;
    if (bytes.size() < headerSize) {
        throw Error(ErrorKind::TruncatedPayload, "dims cut short");
    }
    std::uint64_t count = 1;
    for (std::size_t i = 0; i < rank; ++i) {
        std::uint32_t d = 0;
        for (int b = 0; b < 4; ++b) {
            d |= static_cast<std::uint32_t>(bytes[7 + 4 * i + b]) << (8 * b);
        }
        if (d == 0) {
            throw Error(ErrorKind::BadHeader, "dim " + std::to_string(i) + " is zero");
        }
        if (count > (std::numeric_limits<std::uint64_t>::max() / 8) / d) {
            throw Error(ErrorKind::DimOverflow, "element count overflows");
        }
        count *= d;
        f.dims.push_back(d);
    }
    const std::uint64_t payloadSize = count * elementSize(f.dtype);
    if (payloadSize > std::numeric_limits<std::size_t>::max() - headerSize) {
        throw Error(ErrorKind::DimOverflow, "payload size overflows");
    }
    if (bytes.size() < headerSize + payloadSize) {
        throw Error(ErrorKind::TruncatedPayload, "need " + std::to_string(payloadSize) + " payload bytes, have " +
                                                     std::to_string(bytes.size() - headerSize));
    }
    if (bytes.size() > headerSize + payloadSize) {
        throw Error(ErrorKind::TrailingData, std::to_string(bytes.size() - headerSize - payloadSize) +
                                                 " bytes after payload");
    }
    f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(headerSize), bytes.end());
    return f;
}

namespace detail {

inline std::vector<std::size_t> toSizeDims(const std::vector<std::uint32_t>& dims)
{
    return {dims.begin(), dims.end()};
}

inline std::vector<std::uint32_t> toFileDims(const std::vector<std::size_t>& dims)
{
    std::vector<std::uint32_t> out;
    for (const auto d : dims) {
        if (d > std::numeric_limits<std::uint32_t>::max()) {
            throw Error(ErrorKind::DimOverflow, "dim exceeds u32");
        }
        out.push_back(static_cast<std::uint32_t>(d));
    }
    return out;
}

template <typename T>
void putLE(std::vector<std::uint8_t>& out, T v)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

template <typename T>
T getLE(const std::uint8_t* p)
{
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v = static_cast<T>(v | (static_cast<T>(p[i]) << (8 * i)));
    }
    return v;
}

}  // namespace detail

/// Pack an FP32 tensor as FP32, FP16 or BF16 (narrowing rounds to nearest even).
inline TensorFile toTensorFile(const TensorF32& t, Dtype dtype = Dtype::FP32)
{
    TensorFile f{dtype, detail::toFileDims(t.dims()), {}};
    f.payload.reserve(t.size() * elementSize(dtype));
    for (const float x : t.data()) {
        switch (dtype) {
        case Dtype::FP32: detail::putLE(f.payload, std::bit_cast<std::uint32_t>(x)); break;
        case Dtype::FP16: detail::putLE(f.payload, toFp16Bits(x)); break;
        case Dtype::BF16: detail::putLE(f.payload, toBf16Bits(x)); break;
        case Dtype::HiF8: throw Error(ErrorKind::InvalidArgument, "use the QuantizedTensor overload for HiF8");
        }
    }
    return f;
}

inline TensorFile toTensorFile(const QuantizedTensor& q)
{
    TensorFile f{Dtype::HiF8, detail::toFileDims(q.dims), {}};
    f.payload.reserve(q.codes.size());
    for (const Hif8Code c : q.codes) {
        f.payload.push_back(c.bits);
    }
    return f;
}

/// FP16/BF16 payloads widen exactly to FP32.
inline TensorF32 toTensorF32(const TensorFile& f)
{
    std::vector<float> v(f.elementCount());
    const std::uint8_t* p = f.payload.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
        switch (f.dtype) {
        case Dtype::FP32: v[i] = std::bit_cast<float>(detail::getLE<std::uint32_t>(p + 4 * i)); break;
        case Dtype::FP16: v[i] = fromFp16Bits(detail::getLE<std::uint16_t>(p + 2 * i)); break;
        case Dtype::BF16: v[i] = fromBf16Bits(detail::getLE<std::uint16_t>(p + 2 * i)); break;
        case Dtype::HiF8: v[i] = toFloat(Hif8Code(p[i])); break;
        }
    }
    return TensorF32(detail::toSizeDims(f.dims), std::move(v));
}

/// HiF8 files carry codes only; the result has scaleExp 0 and a default spec.
inline QuantizedTensor toQuantizedTensor(const TensorFile& f)
{
    if (f.dtype != Dtype::HiF8) {
        throw Error(ErrorKind::InvalidArgument, "tensor file does not hold HiF8 codes");
    }
    QuantizedTensor q;
    q.dims = detail::toSizeDims(f.dims);
    q.codes.reserve(f.payload.size());
    for (const std::uint8_t b : f.payload) {
        q.codes.emplace_back(b);
    }
    return q;
}

inline SourceFormat sourceFormatOf(Dtype d)
{
    switch (d) {
    case Dtype::FP16: return SourceFormat::FP16;
    case Dtype::BF16: return SourceFormat::BF16;
    default: return SourceFormat::FP32;
    }
}

inline std::vector<std::uint8_t> readBytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void writeBytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(ErrorKind::Io, "cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorKind::Io, "write failed for " + path.string());
    }
}

inline void writeText(const std::filesystem::path& path, std::string_view text)
{
    writeBytes(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

inline TensorFile readTensorFile(const std::filesystem::path& path)
{
    const auto bytes = readBytes(path);
    try {
        return parseTensorFile(bytes);
    } catch (const Error& e) {
        throw Error(e.kind(), path.string() + ": " + e.what());
    }
}

using AnyTensor = std::variant<TensorF32, QuantizedTensor>;

inline AnyTensor readTensor(const std::filesystem::path& path)
{
    const TensorFile f = readTensorFile(path);
    if (f.dtype == Dtype::HiF8) {
        return toQuantizedTensor(f);
    }
    return toTensorF32(f);
}

inline void writeTensor(const std::filesystem::path& path, const TensorF32& t, Dtype dtype = Dtype::FP32)
{
    writeBytes(path, serializeTensorFile(toTensorFile(t, dtype)));
}

inline void writeTensor(const std::filesystem::path& path, const QuantizedTensor& q)
{
    writeBytes(path, serializeTensorFile(toTensorFile(q)));
}

// ---------------------------------------------------------------------------
// Text helpers

/// Shortest decimal string that parses back to the same double.
inline std::string formatShortest(double x)
{
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x < 0 ? "-inf" : "inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

inline std::string formatShortest(float x)
{
    if (std::isnan(x) || std::isinf(x)) {
        return formatShortest(static_cast<double>(x));
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// JSON: manifest and report

namespace detail {

using nlohmann::json;

[[noreturn]] inline void schemaError(const std::string& where, const std::string& what)
{
    throw Error(ErrorKind::SchemaError, where + ": " + what);
}

inline void rejectUnknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
    for (const auto& [key, _] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            schemaError(where + "/" + key, "unknown field");
        }
    }
}

inline const json& require(const json& obj, const char* key, const std::string& where)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        schemaError(where, std::string("missing field \"") + key + "\"");
    }
    return *it;
}

inline json parseJson(std::string_view text, const std::string& source)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        schemaError(source, e.what());
    }
}

/// Non-finite doubles are not JSON numbers; they travel as strings.
inline json encodeDouble(double x)
{
    if (std::isfinite(x)) {
        return x;
    }
    return formatShortest(x);
}

inline double decodeDouble(const json& j, const std::string& where)
{
    if (j.is_number()) {
        return j.get<double>();
    }
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    schemaError(where, "expected a number");
}

inline int decodeInt(const json& j, const std::string& where)
{
    if (!j.is_number_integer()) {
        schemaError(where, "expected an integer");
    }
    return j.get<int>();
}

inline std::string decodeString(const json& j, const std::string& where)
{
    if (!j.is_string()) {
        schemaError(where, "expected a string");
    }
    return j.get<std::string>();
}

}  // namespace detail

/// Manifest layer entry, as written in the file.
struct ManifestLayer {
    std::string weightPath;
    VectorOp vectorOp = VectorOp::None;
    std::optional<std::string> biasPath;

    friend bool operator==(const ManifestLayer&, const ManifestLayer&) = default;
};

struct Manifest {
    std::vector<ManifestLayer> layers;

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

/// {"layers": [{"weightPath": "...", "vectorOp": "relu", "biasPath": "..."}]}
inline Manifest parseManifest(std::string_view text, const std::string& source = "manifest")
{
    using detail::json;
    const json root = detail::parseJson(text, source);
    if (!root.is_object()) {
        detail::schemaError(source, "top level must be an object");
    }
    detail::rejectUnknown(root, {"layers"}, source);
    const json& layers = detail::require(root, "layers", source);
    if (!layers.is_array()) {
        detail::schemaError(source + "/layers", "expected an array");
    }
    Manifest m;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = source + "/layers/" + std::to_string(i);
        const json& l = layers[i];
        if (!l.is_object()) {
            detail::schemaError(where, "expected an object");
        }
        detail::rejectUnknown(l, {"weightPath", "vectorOp", "biasPath"}, where);
        ManifestLayer ml;
        ml.weightPath = detail::decodeString(detail::require(l, "weightPath", where), where + "/weightPath");
        if (const auto it = l.find("vectorOp"); it != l.end()) {
            const auto name = detail::decodeString(*it, where + "/vectorOp");
            const auto op = parseVectorOp(name);
            if (!op) {
                detail::schemaError(where + "/vectorOp", "unknown op \"" + name + "\"");
            }
            ml.vectorOp = *op;
        }
        if (const auto it = l.find("biasPath"); it != l.end()) {
            ml.biasPath = detail::decodeString(*it, where + "/biasPath");
        }
        if ((ml.vectorOp == VectorOp::Bias) != ml.biasPath.has_value()) {
            detail::schemaError(where, "biasPath is required exactly when vectorOp is \"bias\"");
        }
        m.layers.push_back(std::move(ml));
    }
    return m;
}

inline std::string serializeManifest(const Manifest& m)
{
    detail::json layers = detail::json::array();
    for (const auto& l : m.layers) {
        detail::json j{{"weightPath", l.weightPath}, {"vectorOp", std::string(to_string(l.vectorOp))}};
        if (l.biasPath) {
            j["biasPath"] = *l.biasPath;
        }
        layers.push_back(std::move(j));
    }
    return detail::json{{"layers", layers}}.dump(2) + "\n";
}

/// Load a manifest and the tensors it names; relative paths resolve against
/// the manifest's directory.
inline LayerGraph readManifest(const std::filesystem::path& path)
{
    const auto bytes = readBytes(path);
    const Manifest m = parseManifest({reinterpret_cast<const char*>(bytes.data()), bytes.size()}, path.string());
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) {
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    LayerGraph g;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        Layer layer;
        layer.op = m.layers[i].vectorOp;
        layer.weight = toTensorF32(readTensorFile(resolve(m.layers[i].weightPath)));
        if (m.layers[i].biasPath) {
            const TensorF32 b = toTensorF32(readTensorFile(resolve(*m.layers[i].biasPath)));
            layer.bias.assign(b.data().begin(), b.data().end());
        }
        g.layers.push_back(std::move(layer));
    }
    try {
        g.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::SchemaError, path.string() + ": " + e.what());
    }
    return g;
}

inline std::string serializeReport(const CalibrationReport& r)
{
    using detail::json;
    json layers = json::array();
    for (std::size_t i = 0; i < r.layers.size(); ++i) {
        const auto& l = r.layers[i];
        json grid = json::array();
        for (const double e : l.grid) {
            grid.push_back(detail::encodeDouble(e));
        }
        layers.push_back(json{{"index", i}, {"ea", l.ea}, {"ew", l.ew},
                              {"minErr", detail::encodeDouble(l.minErr)}, {"grid", std::move(grid)}});
    }
    json root{{"datasetId", r.datasetId},
              {"roundingMode", std::string(to_string(r.mode))},
              {"searchRange", json::array({kSearchMin, kSearchMax})},
              {"layers", std::move(layers)}};
    return root.dump(2) + "\n";
}

inline CalibrationReport parseReport(std::string_view text, const std::string& source = "report")
{
    using detail::json;
    const json root = detail::parseJson(text, source);
    if (!root.is_object()) {
        detail::schemaError(source, "top level must be an object");
    }
    detail::rejectUnknown(root, {"datasetId", "roundingMode", "searchRange", "layers"}, source);
    CalibrationReport r;
    r.datasetId = detail::decodeString(detail::require(root, "datasetId", source), source + "/datasetId");
    const auto mode =
        detail::decodeString(detail::require(root, "roundingMode", source), source + "/roundingMode");
    const auto parsed = parseRoundingMode(mode);
    if (!parsed) {
        detail::schemaError(source + "/roundingMode", "unknown mode \"" + mode + "\"");
    }
    r.mode = *parsed;
    if (const auto it = root.find("searchRange"); it != root.end()) {
        if (*it != json::array({kSearchMin, kSearchMax})) {
            detail::schemaError(source + "/searchRange", "must be [-4, 5]");
        }
    }
    const json& layers = detail::require(root, "layers", source);
    if (!layers.is_array()) {
        detail::schemaError(source + "/layers", "expected an array");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string where = source + "/layers/" + std::to_string(i);
        const json& l = layers[i];
        if (!l.is_object()) {
            detail::schemaError(where, "expected an object");
        }
        detail::rejectUnknown(l, {"index", "ea", "ew", "minErr", "grid"}, where);
        if (const auto it = l.find("index"); it != l.end() && detail::decodeInt(*it, where + "/index") != static_cast<int>(i)) {
            detail::schemaError(where + "/index", "out of order");
        }
        LayerCalibration c;
        c.ea = detail::decodeInt(detail::require(l, "ea", where), where + "/ea");
        c.ew = detail::decodeInt(detail::require(l, "ew", where), where + "/ew");
        for (const auto& [name, v] : {std::pair{"ea", c.ea}, std::pair{"ew", c.ew}}) {
            if (v < kSearchMin || v > kSearchMax) {
                detail::schemaError(where + "/" + name, "outside [-4, 5]");
            }
        }
        c.minErr = detail::decodeDouble(detail::require(l, "minErr", where), where + "/minErr");
        if (const auto it = l.find("grid"); it != l.end()) {
            if (!it->is_array() || it->size() != static_cast<std::size_t>(kSearchSpan * kSearchSpan)) {
                detail::schemaError(where + "/grid", "expected 100 values");
            }
            for (std::size_t k = 0; k < it->size(); ++k) {
                c.grid.push_back(detail::decodeDouble((*it)[k], where + "/grid/" + std::to_string(k)));
            }
        }
        r.layers.push_back(std::move(c));
    }
    return r;
}

inline void writeReport(const std::filesystem::path& path, const CalibrationReport& r)
{
    writeText(path, serializeReport(r));
}

inline CalibrationReport readReport(const std::filesystem::path& path)
{
    const auto bytes = readBytes(path);
    return parseReport({reinterpret_cast<const char*>(bytes.data()), bytes.size()}, path.string());
}

// ---------------------------------------------------------------------------
// CSV: event traces and ALS timelines

/// Lines "iteration,overflow" with overflow in {0, 1}. An optional header line
/// "iteration,overflow", blank lines and a trailing newline are accepted.
inline std::vector<TraceEvent> parseTrace(std::string_view text, const std::string& source = "trace")
{
    std::vector<TraceEvent> events;
    std::size_t lineNo = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) {
            end = text.size();
        }
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++lineNo;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || (lineNo == 1 && line == "iteration,overflow")) {
            continue;
        }
        const auto where = source + ":" + std::to_string(lineNo);
        const std::size_t comma = line.find(',');
        if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos) {
            throw Error(ErrorKind::SchemaError, where + ": expected \"iteration,overflow\"");
        }
        TraceEvent ev;
        const auto it = line.substr(0, comma);
        const auto res = std::from_chars(it.data(), it.data() + it.size(), ev.iteration);
        if (res.ec != std::errc{} || res.ptr != it.data() + it.size()) {
            throw Error(ErrorKind::SchemaError, where + ": bad iteration \"" + std::string(it) + "\"");
        }
        const auto flag = line.substr(comma + 1);
        if (flag != "0" && flag != "1") {
            throw Error(ErrorKind::SchemaError, where + ": overflow must be 0 or 1");
        }
        ev.overflow = flag == "1";
        events.push_back(ev);
    }
    return events;
}

inline std::string serializeTrace(const std::vector<TraceEvent>& events)
{
    std::string out;
    for (const auto& e : events) {
        out += std::to_string(e.iteration) + (e.overflow ? ",1\n" : ",0\n");
    }
    return out;
}

inline std::vector<TraceEvent> readTrace(const std::filesystem::path& path)
{
    const auto bytes = readBytes(path);
    return parseTrace({reinterpret_cast<const char*>(bytes.data()), bytes.size()}, path.string());
}

inline void writeTrace(const std::filesystem::path& path, const std::vector<TraceEvent>& events)
{
    writeText(path, serializeTrace(events));
}

inline std::string serializeTimeline(const std::vector<TimelineRow>& rows)
{
    std::string out = "iteration,overflow,scaleExp,window\n";
    for (const auto& r : rows) {
        out += std::to_string(r.iteration) + (r.overflow ? ",1," : ",0,") + std::to_string(r.scaleExp) + "," +
               std::to_string(r.window) + "\n";
    }
    return out;
}

}  // namespace hif8
