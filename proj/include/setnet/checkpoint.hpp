#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "setnet/tensor.hpp"
#include "setnet/text.hpp"

namespace setnet {

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Named tensors plus ordered string metadata.
///
/// Text format, version 1:
///
///     setnet-checkpoint 1
///     meta <key> <value to end of line>
///     tensor <name> <rank> <dim0> ... <dimR-1>
///     <all values on one line, shortest round-trip decimal form>
///     end
///
/// Keys and names contain no whitespace; meta values contain no newlines.
/// Values are written so that reading them back reproduces every bit.
struct Checkpoint {
    static constexpr int format_version = 1;

    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<NamedTensor> tensors;

    const Tensor* find(const std::string& name) const;
    std::optional<std::string> meta_value(const std::string& key) const;
    void set_meta(const std::string& key, std::string value);
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
/// Throws FormatError naming the offending line.
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace setnet
