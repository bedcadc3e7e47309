#include "bintabl/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "bintabl/error.hpp"
#include "bintabl/format.hpp"
#include "bintabl/rng.hpp"

namespace bintabl {

namespace {

constexpr const char* kMagic = "bintabl-checkpoint";
constexpr int kVersion = 1;

double norm_epsilon(const Network& net) {
    if (const auto* p = std::get_if<BinParams>(&net.normalizer)) return p->epsilon;
    if (const auto* p = std::get_if<DainParams>(&net.normalizer)) return p->epsilon;
    if (const auto* p = std::get_if<BatchNormParams>(&net.normalizer)) return p->epsilon;
    return 0.0;
}

void check_token(const std::string& text, const char* what) {
    if (text.empty() || text.find_first_of(" \t\r\n") != std::string::npos) {
        throw ConfigError(std::string("checkpoint ") + what + " '" + text +
                          "' must be a single non-empty token");
    }
}

}  // namespace

void write_checkpoint(std::ostream& out, Network& net, Arch arch, const CheckpointMeta& extra) {
    CheckpointMeta meta = extra;
    meta["arch"] = to_string(arch);
    meta["norm"] = to_string(net.norm_kind());
    meta["dropout"] = format_double(net.dropout.empty() ? 0.0 : net.dropout.front());
    meta["norm_epsilon"] = format_double(norm_epsilon(net));
    const auto* bin = std::get_if<BinParams>(&net.normalizer);
    meta["feature_scale"] =
        bin && bin->feature_scale == FeatureScale::TemporalStd ? "temporal" : "feature";
    if (const auto* bn = std::get_if<BatchNormParams>(&net.normalizer))
        meta["bn_momentum"] = format_double(bn->momentum);

    out << kMagic << ' ' << kVersion << '\n';
    for (const auto& [key, value] : meta) {
        check_token(key, "meta key");
        check_token(value, "meta value");
        out << "meta " << key << ' ' << value << '\n';
    }
    for (const auto& slot : net.state()) {
        const Matrix& m = *slot.value;
        out << "tensor " << slot.name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (i) out << ' ';
            out << format_double(m[i]);
        }
        out << '\n';
    }
    out << "end\n";
}

Checkpoint read_checkpoint(std::istream& in) {
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != kMagic) throw DataError("not a bintabl checkpoint");
    if (version != kVersion)
        throw DataError("unsupported checkpoint version " + std::to_string(version));

    CheckpointMeta meta;
    std::map<std::string, Matrix> tensors;
    std::string kind;
    bool ended = false;
    while (in >> kind) {
        if (kind == "end") {
            ended = true;
            break;
        }
        if (kind == "meta") {
            std::string key, value;
            if (!(in >> key >> value)) throw DataError("checkpoint: truncated meta record");
            meta[key] = value;
        } else if (kind == "tensor") {
            std::string name;
            std::size_t rows = 0, cols = 0;
            if (!(in >> name >> rows >> cols)) throw DataError("checkpoint: truncated tensor header");
            std::vector<double> values(rows * cols);
            std::string token;
            for (double& v : values) {
                if (!(in >> token) || !parse_double(token, v))
                    throw DataError("checkpoint: bad value in tensor '" + name + "'");
            }
            tensors.emplace(name, Matrix(rows, cols, std::move(values)));
        } else {
            throw DataError("checkpoint: unknown record '" + kind + "'");
        }
    }
    if (!ended) throw DataError("checkpoint: missing end marker");

    const auto need = [&](const char* key) -> const std::string& {
        const auto it = meta.find(key);
        if (it == meta.end()) throw DataError(std::string("checkpoint: missing meta '") + key + "'");
        return it->second;
    };
    NetworkOptions options;
    options.norm = parse_norm(need("norm"));
    if (!parse_double(need("dropout"), options.dropout))
        throw DataError("checkpoint: bad dropout");
    options.bin_feature_scale =
        need("feature_scale") == "temporal" ? FeatureScale::TemporalStd : FeatureScale::FeatureStd;
    Rng scratch(0);
    Checkpoint ckpt{build_network(parse_arch(need("arch")), scratch, options), meta};

    double eps = 0.0;
    if (!parse_double(need("norm_epsilon"), eps)) throw DataError("checkpoint: bad norm_epsilon");
    if (auto* p = std::get_if<BinParams>(&ckpt.net.normalizer)) p->epsilon = eps;
    if (auto* p = std::get_if<DainParams>(&ckpt.net.normalizer)) p->epsilon = eps;
    if (auto* p = std::get_if<BatchNormParams>(&ckpt.net.normalizer)) {
        p->epsilon = eps;
        if (!parse_double(need("bn_momentum"), p->momentum))
            throw DataError("checkpoint: bad bn_momentum");
    }

    std::set<std::string> used;
    for (auto& slot : ckpt.net.state()) {
        const auto it = tensors.find(slot.name);
        if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + slot.name + "'");
        if (!it->second.same_shape(*slot.value)) {
            throw DataError("checkpoint: tensor '" + slot.name + "' is " + it->second.shape() +
                            ", network expects " + slot.value->shape());
        }
        *slot.value = it->second;
        used.insert(slot.name);
    }
    for (const auto& [name, tensor] : tensors)
        if (!used.count(name)) throw DataError("checkpoint: unexpected tensor '" + name + "'");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, Network& net, Arch arch,
                     const CheckpointMeta& extra) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint '" + path.string() + "'");
    write_checkpoint(out, net, arch, extra);
    if (!out) throw DataError("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
    return read_checkpoint(in);
}

}  // namespace bintabl
