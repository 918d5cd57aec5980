#include "datta/io.hpp"

#include <cstring>
#include <fstream>

#include "datta/errors.hpp"

namespace datta {

namespace {

// All on-disk integers are little-endian regardless of host order.
template <typename T>
void put(std::ostream &out, T v) {
    unsigned char buf[sizeof(T)];
    for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    out.write(reinterpret_cast<const char *>(buf), sizeof(T));
}

template <typename T>
T get(std::istream &in) {
    unsigned char buf[sizeof(T)];
    in.read(reinterpret_cast<char *>(buf), sizeof(T));
    if (!in) throw FormatError("unexpected end of file");
    T v = 0;
    for (size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

void put_f32(std::ostream &out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    put<uint32_t>(out, bits);
}

float get_f32(std::istream &in) {
    uint32_t bits = get<uint32_t>(in);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    return f;
}

void put_string(std::ostream &out, const std::string &s) {
    if (s.size() > 0xffff) throw FormatError("string too long");
    put<uint16_t>(out, static_cast<uint16_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::istream &in) {
    uint16_t len = get<uint16_t>(in);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw FormatError("unexpected end of file in string");
    return s;
}

} // namespace

void write_dataset(const std::vector<CsiSample> &samples, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write("CSID", 4);
    put<uint16_t>(out, 1);
    put<uint32_t>(out, static_cast<uint32_t>(samples.size()));
    put<uint16_t>(out, static_cast<uint16_t>(kSubcarriers));
    put<uint16_t>(out, static_cast<uint16_t>(kTimeSteps));
    for (const CsiSample &s : samples) {
        if (s.amplitudes.rank() != 2 || s.amplitudes.dim(0) != kSubcarriers ||
            s.amplitudes.dim(1) != kTimeSteps)
            throw FormatError("sample " + s.sample_id + " has shape " + s.amplitudes.shape_str());
        put<uint8_t>(out, static_cast<uint8_t>(s.activity));
        put<uint16_t>(out, static_cast<uint16_t>(s.domain));
        put<uint16_t>(out, static_cast<uint16_t>(s.valid_length));
        put_string(out, s.sample_id);
        for (float v : s.amplitudes.data) put_f32(out, v);
    }
    if (!out) throw FormatError("write failed: " + path);
}

std::vector<CsiSample> read_dataset(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "CSID", 4) != 0) throw FormatError("bad magic in " + path);
    const uint16_t version = get<uint16_t>(in);
    if (version != 1) throw FormatError("unsupported version " + std::to_string(version));
    const uint32_t count = get<uint32_t>(in);
    const uint16_t f = get<uint16_t>(in);
    const uint16_t t = get<uint16_t>(in);
    if (f != kSubcarriers || t != kTimeSteps)
        throw FormatError("dimension mismatch: F=" + std::to_string(f) +
                          " T=" + std::to_string(t));
    std::vector<CsiSample> samples;
    samples.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        CsiSample s;
        s.activity = get<uint8_t>(in);
        s.domain = get<uint16_t>(in);
        s.valid_length = get<uint16_t>(in);
        s.sample_id = get_string(in);
        s.amplitudes = Tensor({kSubcarriers, kTimeSteps});
        for (int64_t j = 0; j < s.amplitudes.numel(); ++j) s.amplitudes.data[j] = get_f32(in);
        samples.push_back(std::move(s));
    }
    return samples;
}

const Tensor *TensorArchive::find(const std::string &name) const {
    for (const auto &[n, t] : tensors)
        if (n == name) return &t;
    return nullptr;
}

void write_archive(const TensorArchive &archive, const std::string &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write("NTAR", 4);
    put<uint16_t>(out, 1);
    put<uint64_t>(out, archive.config_hash);
    put<uint32_t>(out, static_cast<uint32_t>(archive.tensors.size()));
    for (const auto &[name, tensor] : archive.tensors) {
        put_string(out, name);
        put<uint8_t>(out, 0);  // float32
        put<uint8_t>(out, static_cast<uint8_t>(tensor.rank()));
        for (int64_t d : tensor.shape) put<uint32_t>(out, static_cast<uint32_t>(d));
        for (float v : tensor.data) put_f32(out, v);
    }
    if (!out) throw FormatError("write failed: " + path);
}

TensorArchive read_archive(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NTAR", 4) != 0) throw FormatError("bad magic in " + path);
    const uint16_t version = get<uint16_t>(in);
    if (version != 1) throw FormatError("unsupported version " + std::to_string(version));
    TensorArchive archive;
    archive.config_hash = get<uint64_t>(in);
    const uint32_t count = get<uint32_t>(in);
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = get_string(in);
        const uint8_t dtype = get<uint8_t>(in);
        if (dtype != 0) throw FormatError("unsupported dtype " + std::to_string(dtype));
        const uint8_t ndim = get<uint8_t>(in);
        std::vector<int64_t> shape(ndim);
        for (uint8_t d = 0; d < ndim; ++d) shape[d] = get<uint32_t>(in);
        Tensor t(shape);
        for (int64_t j = 0; j < t.numel(); ++j) t.data[j] = get_f32(in);
        archive.add(name, std::move(t));
    }
    return archive;
}

} // namespace datta
