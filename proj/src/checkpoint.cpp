#include "setnet/checkpoint.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "setnet/error.hpp"

namespace setnet {

const Tensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t.value;
    return nullptr;
}

std::optional<std::string> Checkpoint::meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return v;
    return std::nullopt;
}

void Checkpoint::set_meta(const std::string& key, std::string value) {
    for (auto& [k, v] : meta) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    meta.emplace_back(key, std::move(value));
}

namespace {

void require_token(const std::string& s, const char* what) {
    if (s.empty() || s.find_first_of(" \t\r\n") != std::string::npos) {
        throw FormatError(std::string("checkpoint ") + what + " '" + s + "' must be a single token");
    }
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
    os << "setnet-checkpoint " << Checkpoint::format_version << '\n';
    for (const auto& [k, v] : ckpt.meta) {
        require_token(k, "meta key");
        if (v.find('\n') != std::string::npos) throw FormatError("meta value contains a newline");
        os << "meta " << k << ' ' << v << '\n';
    }
    for (const auto& t : ckpt.tensors) {
        require_token(t.name, "tensor name");
        os << "tensor " << t.name << ' ' << t.value.rank();
        for (auto d : t.value.shape()) os << ' ' << d;
        os << '\n';
        bool first = true;
        for (double v : t.value.data()) {
            if (!first) os << ' ';
            os << format_double(v);
            first = false;
        }
        os << '\n';
    }
    os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
    Checkpoint ckpt;
    std::string line;
    std::size_t line_no = 0;
    auto fail = [&](const std::string& msg) -> FormatError {
        return FormatError("checkpoint line " + std::to_string(line_no) + ": " + msg);
    };
    auto next_line = [&]() -> bool {
        if (!std::getline(is, line)) return false;
        ++line_no;
        return true;
    };

    if (!next_line()) throw fail("empty input");
    {
        std::istringstream hs(line);
        std::string magic;
        int version = 0;
        if (!(hs >> magic >> version) || magic != "setnet-checkpoint") throw fail("bad header");
        if (version != Checkpoint::format_version) {
            throw fail("unsupported version " + std::to_string(version));
        }
    }
    bool ended = false;
    while (next_line()) {
        if (line == "end") {
            ended = true;
            break;
        }
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "meta") {
            std::string key;
            if (!(ls >> key)) throw fail("meta without key");
            std::string value;
            std::getline(ls, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ckpt.meta.emplace_back(std::move(key), std::move(value));
        } else if (kind == "tensor") {
            std::string name;
            std::size_t rank = 0;
            if (!(ls >> name >> rank)) throw fail("malformed tensor header");
            Shape shape(rank);
            for (auto& d : shape)
                if (!(ls >> d)) throw fail("missing tensor dimension");
            const std::size_t count = shape_size(shape);
            if (!next_line()) throw fail("missing values for tensor " + name);
            std::vector<double> values;
            values.reserve(count);
            std::istringstream vs(line);
            std::string tok;
            while (vs >> tok) {
                auto v = parse_double(tok);
                if (!v) throw fail("bad number '" + tok + "'");
                values.push_back(*v);
            }
            if (values.size() != count) {
                throw fail("tensor " + name + " expects " + std::to_string(count) + " values, got " +
                           std::to_string(values.size()));
            }
            ckpt.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
        } else if (!kind.empty()) {
            throw fail("unknown record '" + kind + "'");
        }
    }
    if (!ended) throw fail("truncated (no end marker)");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream os(path);
    if (!os) throw FormatError("cannot write checkpoint " + path.string());
    write_checkpoint(os, ckpt);
    if (!os) throw FormatError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open checkpoint " + path.string());
    return read_checkpoint(is);
}

}  // namespace setnet
