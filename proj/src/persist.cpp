#include "mcnsfv/persist.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "json.hpp"
#include "mcnsfv/errors.hpp"

namespace mcnsfv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'F', 'V', 'F', '1'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::string_view bytes, std::size_t at, int width) {
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + i])) << (8 * i);
    return v;
}

std::string sample_file(std::uint64_t id, const char* unknown) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "sample_%06llu_%s.fvf", static_cast<unsigned long long>(id),
                  unknown);
    return buf;
}

json spec_json(const EnsembleSpec& spec) {
    json j;
    j["experiment"] = to_string(spec.model.experiment);
    j["n"] = spec.n;
    j["d"] = spec.d;
    j["dt_factor"] = spec.scheme.dt_factor;
    j["epsilon"] = spec.scheme.epsilon;
    j["gamma"] = spec.pressure.gamma;
    j["a"] = spec.pressure.a;
    j["mu"] = spec.model.mu;
    j["lambda"] = spec.model.lambda;
    j["T"] = spec.scheme.T;
    j["seed"] = spec.model.seed;
    j["half_width"] = spec.model.half_width;
    j["quad_points"] = spec.scheme.quad_points;
    const SolverSettings& s = spec.scheme.solver;
    j["solver"] = {{"tol_abs", s.tol_abs},
                   {"tol_rel", s.tol_rel},
                   {"max_iters", s.max_iters},
                   {"max_dt_halvings", s.max_dt_halvings},
                   {"linear", s.linear == LinearSolverKind::direct      ? "direct"
                              : s.linear == LinearSolverKind::iterative ? "iterative"
                                                                        : "auto"}};
    if (spec.model.forced_y) j["forced_y"] = *spec.model.forced_y;
    j["config_hash"] = spec.hash();
    j["format_version"] = kManifestVersion;
    return j;
}

EnsembleSpec spec_from_json(const json& j) {
    EnsembleSpec spec;
    try {
        spec.model.experiment = parse_experiment(j.at("experiment").get<std::string>());
        spec.n = j.at("n").get<int>();
        spec.d = j.at("d").get<int>();
        spec.scheme.dt_factor = j.at("dt_factor").get<double>();
        spec.scheme.epsilon = j.at("epsilon").get<double>();
        spec.pressure.gamma = j.at("gamma").get<double>();
        spec.pressure.a = j.at("a").get<double>();
        spec.model.mu = j.at("mu").get<double>();
        spec.model.lambda = j.at("lambda").get<double>();
        spec.scheme.T = j.at("T").get<double>();
        spec.model.seed = j.at("seed").get<std::uint64_t>();
        spec.model.half_width = j.at("half_width").get<double>();
        spec.scheme.quad_points = j.at("quad_points").get<int>();
        const json& s = j.at("solver");
        spec.scheme.solver.tol_abs = s.at("tol_abs").get<double>();
        spec.scheme.solver.tol_rel = s.at("tol_rel").get<double>();
        spec.scheme.solver.max_iters = s.at("max_iters").get<int>();
        spec.scheme.solver.max_dt_halvings = s.at("max_dt_halvings").get<int>();
        const auto linear = s.at("linear").get<std::string>();
        spec.scheme.solver.linear = linear == "direct"      ? LinearSolverKind::direct
                                    : linear == "iterative" ? LinearSolverKind::iterative
                                                            : LinearSolverKind::automatic;
        if (j.contains("forced_y")) spec.model.forced_y = j.at("forced_y").get<std::array<double, 3>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return spec;
}

json read_manifest(const fs::path& dir, int expected_n, const char* kind) {
    const fs::path path = dir / kManifestName;
    if (!fs::exists(path)) throw FormatError("manifest not found: " + path.string());
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw FormatError("manifest " + path.string() + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("format_version"))
        throw FormatError("manifest " + path.string() + ": missing format_version");
    if (j["format_version"] != kManifestVersion)
        throw FormatError("manifest " + path.string() + ": format version " +
                          j["format_version"].dump() + ", expected " +
                          std::to_string(kManifestVersion));
    if (j.value("kind", "") != kind)
        throw FormatError("manifest " + path.string() + ": not a " + std::string(kind) + " manifest");
    const int n = j.value("n", -1);
    if (n != expected_n)
        throw MeshMismatch("manifest " + path.string() + ": mesh n = " + std::to_string(n) +
                           ", requested n = " + std::to_string(expected_n));
    return j;
}

void check_hash(const json& j, const EnsembleSpec& spec, const fs::path& dir) {
    if (j.value("config_hash", "") != spec.hash())
        throw FormatError("manifest " + (dir / kManifestName).string() +
                          ": config_hash does not match the recorded configuration");
}

Field load_payload(const fs::path& dir, const json& checksums, const std::string& name,
                   const MeshPtr& mesh, int components, long long sample_id) {
    if (!checksums.contains(name)) throw FormatError("manifest lists no checksum for " + name);
    const fs::path path = dir / name;
    if (!fs::exists(path))
        throw ChecksumError("payload missing: " + path.string(), sample_id);
    const std::string bytes = read_file(path);
    if (checksum_hex(bytes) != checksums.at(name).get<std::string>()) {
        std::string what = "checksum mismatch in " + path.string();
        if (sample_id >= 0) what += " (sample " + std::to_string(sample_id) + ")";
        throw ChecksumError(what, sample_id);
    }
    return decode_fvf(bytes, mesh, components);
}

void begin_write(const fs::path& dir) {
    fs::create_directories(dir);
    fs::remove(dir / kManifestName);
}

} // namespace

std::string encode_fvf(const Field& f) {
    if (!f.mesh_ptr()) throw DomainError("encode_fvf: field has no mesh");
    std::string out(kMagic, 4);
    out.reserve(kHeaderBytes + 8 * f.values().size());
    put_u32(out, kFvfVersion);
    put_u32(out, static_cast<std::uint32_t>(f.mesh().dim()));
    put_u32(out, static_cast<std::uint32_t>(f.mesh().cells_per_axis()));
    put_u32(out, static_cast<std::uint32_t>(f.components()));
    for (double v : f.values()) put_f64(out, v);
    return out;
}

FvfHeader read_fvf_header(std::string_view bytes) {
    if (bytes.size() < kHeaderBytes || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw FormatError("FVF1: bad magic or truncated header");
    FvfHeader h;
    h.version = static_cast<std::uint32_t>(get_le(bytes, 4, 4));
    h.d = static_cast<std::uint32_t>(get_le(bytes, 8, 4));
    h.n = static_cast<std::uint32_t>(get_le(bytes, 12, 4));
    h.components = static_cast<std::uint32_t>(get_le(bytes, 16, 4));
    if (h.version != kFvfVersion)
        throw FormatError("FVF1: version " + std::to_string(h.version) + ", expected " +
                          std::to_string(kFvfVersion));
    std::uint64_t cells = 1;
    for (std::uint32_t a = 0; a < h.d; ++a) cells *= h.n;
    if (bytes.size() != kHeaderBytes + 8 * cells * h.components)
        throw FormatError("FVF1: payload length " + std::to_string(bytes.size()) +
                          " does not match the header");
    return h;
}

Field decode_fvf(std::string_view bytes, const MeshPtr& mesh, int components) {
    const FvfHeader h = read_fvf_header(bytes);
    if (static_cast<int>(h.d) != mesh->dim() || static_cast<int>(h.n) != mesh->cells_per_axis())
        throw MeshMismatch("FVF1: payload mesh d=" + std::to_string(h.d) + " n=" +
                           std::to_string(h.n) + ", expected d=" + std::to_string(mesh->dim()) +
                           " n=" + std::to_string(mesh->cells_per_axis()));
    if (static_cast<int>(h.components) != components)
        throw MeshMismatch("FVF1: payload has " + std::to_string(h.components) +
                           " components, expected " + std::to_string(components));
    Field f(mesh, components);
    auto vals = f.values();
    for (std::size_t i = 0; i < vals.size(); ++i)
        vals[i] = std::bit_cast<double>(get_le(bytes, kHeaderBytes + 8 * i, 8));
    return f;
}

std::uint32_t crc32(std::string_view bytes) {
    uLong c = ::crc32(0L, Z_NULL, 0);
    std::size_t off = 0;
    while (off < bytes.size()) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - off, 1u << 30));
        c = ::crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), chunk);
        off += chunk;
    }
    return static_cast<std::uint32_t>(c);
}

std::string checksum_hex(std::string_view bytes) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc32(bytes));
    return buf;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void save_ensemble(const Ensemble& ens, const fs::path& dir) {
    begin_write(dir);
    json j = spec_json(ens.spec);
    j["kind"] = "ensemble";
    j["realisation"] = ens.realisation;
    j["sample_ids"] = ens.sample_ids;
    j["failed_ids"] = ens.failed_ids();
    json reasons = json::object();
    for (const auto& f : ens.failures) reasons[std::to_string(f.sample_id)] = f.reason;
    j["failure_reasons"] = reasons;
    json sums = json::object();
    for (std::size_t i = 0; i < ens.states.size(); ++i) {
        const std::uint64_t id = ens.state_ids[i];
        for (const auto& [name, field] :
             {std::pair{sample_file(id, "rho"), &ens.states[i].rho},
              std::pair{sample_file(id, "m"), &ens.states[i].mom}}) {
            const std::string bytes = encode_fvf(*field);
            write_file_atomic(dir / name, bytes);
            sums[name] = checksum_hex(bytes);
        }
    }
    j["payload_checksums"] = sums;
    write_file_atomic(dir / kManifestName, j.dump(2) + "\n");
}

Ensemble load_ensemble(const fs::path& dir, int expected_n) {
    const json j = read_manifest(dir, expected_n, "ensemble");
    Ensemble ens;
    ens.spec = spec_from_json(j);
    check_hash(j, ens.spec, dir);
    ens.mesh = build_mesh(ens.spec.n, ens.spec.d);
    try {
        ens.realisation = j.at("realisation").get<std::uint32_t>();
        ens.sample_ids = j.at("sample_ids").get<std::vector<std::uint64_t>>();
        const auto failed = j.at("failed_ids").get<std::vector<std::uint64_t>>();
        const json reasons = j.value("failure_reasons", json::object());
        for (auto id : failed)
            ens.failures.push_back({id, reasons.value(std::to_string(id), std::string())});
        const json& sums = j.at("payload_checksums");
        for (auto id : ens.sample_ids) {
            if (std::find(failed.begin(), failed.end(), id) != failed.end()) continue;
            State s{load_payload(dir, sums, sample_file(id, "rho"), ens.mesh, 1, (long long)id),
                    load_payload(dir, sums, sample_file(id, "m"), ens.mesh, ens.spec.d, (long long)id)};
            if (!(min_density(s) > 0.0))
                throw FormatError("sample " + std::to_string(id) + ": nonpositive density");
            ens.state_ids.push_back(id);
            ens.states.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return ens;
}

namespace {

const std::map<std::string, Field ReferenceStats::*> kReferencePayloads = {
    {"mean_rho.fvf", &ReferenceStats::mean_rho}, {"mean_m.fvf", &ReferenceStats::mean_m},
    {"mean_u.fvf", &ReferenceStats::mean_u},     {"dev_rho.fvf", &ReferenceStats::dev_rho},
    {"dev_m.fvf", &ReferenceStats::dev_m},       {"var_u.fvf", &ReferenceStats::var_u},
};

int reference_components(const std::string& name, int d) {
    return name == "mean_m.fvf" || name == "mean_u.fvf" ? d : 1;
}

} // namespace

void save_reference(const ReferenceStats& ref, const fs::path& dir) {
    begin_write(dir);
    json j = spec_json(ref.spec);
    j["kind"] = "reference";
    j["realisation"] = 0;
    j["S"] = ref.S;
    j["sample_ids"] = ref.sample_ids;
    j["failed_ids"] = ref.failed_ids;
    json sums = json::object();
    for (const auto& [name, member] : kReferencePayloads) {
        const std::string bytes = encode_fvf(ref.*member);
        write_file_atomic(dir / name, bytes);
        sums[name] = checksum_hex(bytes);
    }
    j["payload_checksums"] = sums;
    write_file_atomic(dir / kManifestName, j.dump(2) + "\n");
}

ReferenceStats load_reference(const fs::path& dir, int expected_n) {
    const json j = read_manifest(dir, expected_n, "reference");
    ReferenceStats ref;
    ref.spec = spec_from_json(j);
    check_hash(j, ref.spec, dir);
    const MeshPtr mesh = build_mesh(ref.spec.n, ref.spec.d);
    try {
        ref.S = j.at("S").get<std::size_t>();
        ref.sample_ids = j.at("sample_ids").get<std::vector<std::uint64_t>>();
        ref.failed_ids = j.at("failed_ids").get<std::vector<std::uint64_t>>();
        const json& sums = j.at("payload_checksums");
        for (const auto& [name, member] : kReferencePayloads)
            ref.*member = load_payload(dir, sums, name, mesh, reference_components(name, ref.spec.d), -1);
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest: ") + e.what());
    }
    return ref;
}

} // namespace mcnsfv
