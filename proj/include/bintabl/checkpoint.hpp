#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "bintabl/network.hpp"

namespace bintabl {

/// Text checkpoint container:
///
///   bintabl-checkpoint 1
///   meta <key> <value>                      (zero or more)
///   tensor <name> <rows> <cols>
///   <rows*cols values, row-major, shortest round-trip decimals>
///   ...
///   end
///
/// Meta keys `arch`, `norm`, `feature_scale`, `dropout` and `norm_epsilon`
/// describe the network structure; any other keys (run configuration)
/// are carried through untouched. Reading back reproduces every tensor
/// bit for bit.
using CheckpointMeta = std::map<std::string, std::string>;

struct Checkpoint {
    Network net;
    CheckpointMeta meta;
};

void write_checkpoint(std::ostream& out, Network& net, Arch arch, const CheckpointMeta& extra = {});
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, Network& net, Arch arch,
                     const CheckpointMeta& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bintabl
