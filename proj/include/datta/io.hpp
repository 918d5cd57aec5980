#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "datta/data.hpp"
#include "datta/tensor.hpp"

namespace datta {

// Dataset interchange format (little-endian binary):
//   magic "CSID", version u16=1, sample_count u32, F u16, T u16;
//   per sample: activity u8, domain u16, valid_length u16,
//   sample_id u16 length-prefixed UTF-8, F*T float32 row-major.
void write_dataset(const std::vector<CsiSample> &samples, const std::string &path);
std::vector<CsiSample> read_dataset(const std::string &path);

// Named-tensor archive for checkpoints and source statistics:
//   magic "NTAR", version u16=1, config_hash u64, tensor_count u32;
//   per tensor: name u16 length-prefixed, dtype u8 (0 = float32), ndim u8,
//   dims u32 each, raw float32 data little-endian. Round-trips bit-exactly.
struct TensorArchive {
    uint64_t config_hash = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string &name, Tensor t) { tensors.emplace_back(name, std::move(t)); }
    const Tensor *find(const std::string &name) const;
};

void write_archive(const TensorArchive &archive, const std::string &path);
TensorArchive read_archive(const std::string &path);

} // namespace datta
