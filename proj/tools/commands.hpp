// Copyright 2026 The hif8 Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hif8/hif8.hpp"

// hif8 command-line surface. Kept in a header so the test suite can drive
// the exact same code paths in-process.
//
// Exit codes: 0 success, 1 invalid flags or input content, 2 I/O failure.

namespace hif8::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

struct CliConfig {
    std::string round = "ta";
    std::optional<std::string> src;
    bool saturate = false;
    bool nanToZero = false;
    std::optional<std::uint64_t> seed;
    int scaleExp = 0;
    std::optional<std::string> out;
    std::string format = "hif8";
};

/// Flag combinations are checked here, before any file is opened.
inline RoundingSpec resolveSpec(const CliConfig& cfg, std::optional<SourceFormat> fileFormat = std::nullopt)
{
    const auto mode = parseRoundingMode(cfg.round);
    if (!mode) {
        throw Error(ErrorKind::InvalidArgument, "--round: unknown mode \"" + cfg.round + "\"");
    }
    RoundingSpec spec;
    spec.mode = *mode;
    spec.overflow = cfg.saturate ? OverflowPolicy::SaturateToBoundary : OverflowPolicy::ToInfinity;
    spec.nan = cfg.nanToZero ? NanPolicy::SaturateToZero : NanPolicy::Propagate;

    if (cfg.src) {
        if (*cfg.src == "fp32") spec.source = SourceFormat::FP32;
        else if (*cfg.src == "fp16") spec.source = SourceFormat::FP16;
        else if (*cfg.src == "bf16") spec.source = SourceFormat::BF16;
        else throw Error(ErrorKind::InvalidArgument, "--src: unknown format \"" + *cfg.src + "\"");
    } else if (cfg.round == "sr2") {
        spec.source = SourceFormat::FP16;
    } else if (fileFormat) {
        spec.source = *fileFormat;
    }
    if (cfg.round == "sr14" && spec.source != SourceFormat::FP32) {
        throw Error(ErrorKind::InvalidArgument, "--round sr14 needs an fp32 source");
    }
    if (cfg.round == "sr2" && spec.source == SourceFormat::FP32) {
        throw Error(ErrorKind::InvalidArgument, "--round sr2 needs an fp16 or bf16 source");
    }
    if (spec.mode == RoundingMode::SrStandard) {
        if (!cfg.seed) {
            throw Error(ErrorKind::InvalidArgument, "--round sr requires --seed");
        }
        spec.seed = *cfg.seed;
    } else if (cfg.seed) {
        throw Error(ErrorKind::InvalidArgument, "--seed is only valid with --round sr");
    }
    checkScaleExp(cfg.scaleExp);
    return spec;
}

inline Format resolveFormat(const std::string& name)
{
    const auto f = parseFormat(name);
    if (!f) {
        throw Error(ErrorKind::InvalidArgument, "--format: unknown format \"" + name + "\"");
    }
    return *f;
}

/// Data goes to --out when given, stdout otherwise.
inline void emit(const std::optional<std::string>& path, const std::string& text, std::ostream& out)
{
    if (path) {
        writeText(*path, text);
    } else {
        out << text;
    }
}

inline std::string hexCode(std::uint8_t b)
{
    char buf[8];
    std::snprintf(buf, sizeof(buf), "0x%02X", b);
    return buf;
}

inline std::string tableCsv(Format format)
{
    std::string csv = "code,class,sign,E,M,value\n";
    for (unsigned b = 0; b < 256; ++b) {
        const auto code = static_cast<std::uint8_t>(b);
        const DecodedNumber d = decodeAny(code, format);
        csv += hexCode(code) + ",";
        csv += to_string(classify(d));
        csv += ",";
        if (d.kind == ValueKind::NaN) {
            csv += ",,,\n";
            continue;
        }
        csv += d.negative ? "-," : "+,";
        if (d.kind == ValueKind::Finite) {
            const unsigned manBits = format == Format::HiF8 ? fields(Hif8Code(code)).mantissaBits
                                     : format == Format::E4M3 ? 3U : 2U;
            csv += std::to_string(d.exponent) + "," + std::to_string(code & ((1U << manBits) - 1U)) + ",";
        } else {
            csv += ",,";
        }
        csv += formatShortest(d.value()) + "\n";
    }
    return csv;
}

inline std::string profileCsv(Format format)
{
    std::string csv = "exponent,fractionBits\n";
    for (const auto& row : precisionProfile(describe(format))) {
        csv += std::to_string(row.exponent) + "," + std::to_string(row.fractionBits) + "\n";
    }
    return csv;
}

inline std::string statsHeader() { return "mse,maxAbsErr,snrDb,zeroFraction,overflowCount"; }

inline std::string statsRow(const ErrorStats& s)
{
    return formatShortest(s.mse) + "," + formatShortest(s.maxAbsErr) + "," + formatShortest(s.snrDb) + "," +
           formatShortest(s.zeroFraction) + "," + std::to_string(s.overflowCount);
}

inline TensorF32 fp8FakeQuant(const TensorF32& t, Fp8Variant v)
{
    std::vector<float> out(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        out[i] = static_cast<float>(decodeFp8(roundToFp8(t[i], v), v).value());
    }
    return TensorF32(t.dims(), std::move(out));
}

/// FP32 view of a non-HiF8 tensor file plus its native source format.
inline std::pair<TensorF32, SourceFormat> loadHighPrecision(const std::string& path)
{
    const TensorFile f = readTensorFile(path);
    if (f.dtype == Dtype::HiF8) {
        throw Error(ErrorKind::InvalidArgument, path + ": expected an FP32/FP16/BF16 tensor, got HiF8 codes");
    }
    return {toTensorF32(f), sourceFormatOf(f.dtype)};
}

inline int cmdTable(const CliConfig& cfg, std::ostream& out)
{
    const Format f = resolveFormat(cfg.format);
    emit(cfg.out, tableCsv(f), out);
    return kExitOk;
}

inline int cmdPrecisionProfile(const CliConfig& cfg, std::ostream& out)
{
    const Format f = resolveFormat(cfg.format);
    emit(cfg.out, profileCsv(f), out);
    return kExitOk;
}

/// High-precision tensor -> HiF8 code tensor; HiF8 code tensor -> FP32
/// (descaled by --scale-exp).
inline int cmdConvert(const std::string& in, const CliConfig& cfg, std::ostream&)
{
    if (!cfg.out) {
        throw Error(ErrorKind::InvalidArgument, "convert needs --out");
    }
    resolveSpec(cfg);
    const TensorFile f = readTensorFile(in);
    if (f.dtype == Dtype::HiF8) {
        QuantizedTensor q = toQuantizedTensor(f);
        q.scaleExp = cfg.scaleExp;
        writeTensor(*cfg.out, dequantizeTensor(q));
        return kExitOk;
    }
    const RoundingSpec spec = resolveSpec(cfg, sourceFormatOf(f.dtype));
    writeTensor(*cfg.out, quantizeTensor(toTensorF32(f), spec, cfg.scaleExp));
    return kExitOk;
}

inline int cmdQuantizeStats(const std::string& in, const CliConfig& cfg, std::ostream& out)
{
    resolveSpec(cfg);
    const auto [t, native] = loadHighPrecision(in);
    const RoundingSpec spec = resolveSpec(cfg, native);
    const ErrorStats s = errorStats(t, fakeQuant(t, spec, cfg.scaleExp));
    emit(cfg.out, statsHeader() + "\n" + statsRow(s) + "\n", out);
    return kExitOk;
}

inline int cmdCompare(const std::string& in, const CliConfig& cfg, std::ostream& out)
{
    resolveSpec(cfg);
    const auto [t, native] = loadHighPrecision(in);
    const RoundingSpec spec = resolveSpec(cfg, native);
    std::string csv = "format," + statsHeader() + "\n";
    csv += "hif8," + statsRow(errorStats(t, fakeQuant(t, spec, cfg.scaleExp))) + "\n";
    csv += "e4m3," + statsRow(errorStats(t, fp8FakeQuant(t, Fp8Variant::E4M3))) + "\n";
    csv += "e5m2," + statsRow(errorStats(t, fp8FakeQuant(t, Fp8Variant::E5M2))) + "\n";
    emit(cfg.out, csv, out);
    return kExitOk;
}

struct CalibrateArgs {
    std::string manifest;
    std::string data;
    std::string datasetId = "calib";
    bool noInputCast = false;
};

/// Writes the report JSON to --out (and a per-layer CSV summary to stdout),
/// or the report JSON to stdout when --out is absent.
inline int cmdCalibrate(const CalibrateArgs& args, const CliConfig& cfg, std::ostream& out)
{
    if (cfg.round != "ta") {
        throw Error(ErrorKind::InvalidArgument, "calibration casts with --round ta only");
    }
    CalibrationOptions opts;
    opts.spec = resolveSpec(cfg);
    opts.datasetId = args.datasetId;
    opts.quantizeFirstInput = !args.noInputCast;
    const LayerGraph model = readManifest(args.manifest);
    const auto [data, native] = loadHighPrecision(args.data);
    (void)native;
    const CalibrationRun run = calibrate(model, data, opts);
    if (!cfg.out) {
        out << serializeReport(run.report);
        return kExitOk;
    }
    writeReport(*cfg.out, run.report);
    out << "layer,ea,ew,minErr,directCastErr\n";
    for (std::size_t l = 0; l < run.report.layers.size(); ++l) {
        const auto& c = run.report.layers[l];
        out << l << "," << c.ea << "," << c.ew << "," << formatShortest(c.minErr) << ","
            << formatShortest(c.directCastErr()) << "\n";
    }
    return kExitOk;
}

inline int cmdSimulateAls(const std::string& trace, const CliConfig& cfg, std::ostream& out)
{
    emit(cfg.out, serializeTimeline(simulateAls(readTrace(trace))), out);
    return kExitOk;
}

inline int exitCodeFor(const Error& e)
{
    return e.kind() == ErrorKind::Io ? kExitIo : kExitValidation;
}

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"HiFloat8 reference tools", "hif8"};
    app.require_subcommand(1);

    CliConfig cfg;
    auto addSpecFlags = [&cfg](CLI::App* sub) {
        sub->add_option("--round", cfg.round, "ta|te|sr|sr14|sr2|hr");
        sub->add_option("--src", cfg.src, "fp32|fp16|bf16 (default: the file's dtype)");
        sub->add_flag("--saturate", cfg.saturate, "saturate overflow to +-2^15 instead of infinity");
        sub->add_flag("--nan-to-zero", cfg.nanToZero, "map NaN to zero");
        sub->add_option("--seed", cfg.seed, "generator seed, --round sr only");
        sub->add_option("--scale-exp", cfg.scaleExp, "power-of-two scale applied before the cast");
    };
    auto addOut = [&cfg](CLI::App* sub) { sub->add_option("--out", cfg.out, "output path (default: stdout)"); };

    std::string in;
    CalibrateArgs cal;

    auto* table = app.add_subcommand("table", "code table as CSV");
    table->add_option("--format", cfg.format, "hif8|e4m3|e5m2");
    addOut(table);

    auto* profile = app.add_subcommand("precision-profile", "fraction bits per exponent as CSV");
    profile->add_option("--format", cfg.format, "hif8|e4m3|e5m2");
    addOut(profile);

    auto* convert = app.add_subcommand("convert", "cast a tensor file to HiF8, or decode a HiF8 tensor file");
    convert->add_option("--in", in, "input tensor file")->required();
    addSpecFlags(convert);
    addOut(convert);

    auto* stats = app.add_subcommand("quantize-stats", "fake-quantization error statistics");
    stats->add_option("--in", in, "input tensor file")->required();
    addSpecFlags(stats);
    addOut(stats);

    auto* compare = app.add_subcommand("compare", "HiF8 vs FP8-E4M3 vs FP8-E5M2 error statistics");
    compare->add_option("--in", in, "input tensor file")->required();
    addSpecFlags(compare);
    addOut(compare);

    auto* calibrateCmd = app.add_subcommand("calibrate", "per-tensor scale calibration");
    calibrateCmd->add_option("--manifest", cal.manifest, "model manifest (JSON)")->required();
    calibrateCmd->add_option("--data", cal.data, "calibration batch tensor file")->required();
    calibrateCmd->add_option("--dataset-id", cal.datasetId, "identifier recorded in the report");
    calibrateCmd->add_flag("--no-input-cast", cal.noInputCast, "keep the calibration batch in FP32 for layer 1");
    addSpecFlags(calibrateCmd);
    addOut(calibrateCmd);

    std::string trace;
    auto* als = app.add_subcommand("simulate-als", "replay an overflow trace through adaptive loss scaling");
    als->add_option("--trace", trace, "CSV trace \"iteration,overflow\"")->required();
    addOut(als);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "hif8: " << e.what() << "\n";
        return kExitValidation;
    }

    try {
        if (table->parsed()) return cmdTable(cfg, out);
        if (profile->parsed()) return cmdPrecisionProfile(cfg, out);
        if (convert->parsed()) return cmdConvert(in, cfg, out);
        if (stats->parsed()) return cmdQuantizeStats(in, cfg, out);
        if (compare->parsed()) return cmdCompare(in, cfg, out);
        if (calibrateCmd->parsed()) return cmdCalibrate(cal, cfg, out);
        if (als->parsed()) return cmdSimulateAls(trace, cfg, out);
    } catch (const Error& e) {
        err << "hif8: " << e.what() << "\n";
        return exitCodeFor(e);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "hif8: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        err << "hif8: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace hif8::cli
