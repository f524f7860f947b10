#include "ain/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace ain {
namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

template <typename U>
void put(std::ostream& out, U v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& in, const char* what) {
    U v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(U)))
        throw FormatError(std::string("truncated tensor stream while reading ") + what);
    return v;
}

template <typename T>
constexpr ElementType element_type() {
    return sizeof(T) == 4 ? ElementType::F32 : ElementType::F64;
}

template <typename Stored, typename T>
std::vector<T> read_elements(std::istream& in, std::size_t n) {
    std::vector<Stored> raw(n);
    if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n * sizeof(Stored))))
        throw FormatError("truncated tensor payload: expected " + std::to_string(n) + " elements");
    if constexpr (std::is_same_v<Stored, T>) {
        return raw;
    } else {
        return std::vector<T>(raw.begin(), raw.end());
    }
}

}  // namespace

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
    out.write(kTensorMagic, 4);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(element_type<T>()));
    put<std::uint32_t>(out, 0);
    for (std::size_t e : t.shape()) put<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(t.raw()), static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!out) throw FormatError("failed writing tensor stream");
}

template <typename T>
Tensor<T> read_tensor(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kTensorMagic, 4) != 0)
        throw FormatError("bad tensor magic (expected AINT)");
    const auto rank = get<std::uint32_t>(in, "rank");
    const auto type = static_cast<ElementType>(get<std::uint32_t>(in, "element type"));
    (void)get<std::uint32_t>(in, "reserved");
    if (rank > 16) throw FormatError("implausible tensor rank " + std::to_string(rank));
    Shape shape(rank);
    for (auto& e : shape) {
        e = get<std::uint64_t>(in, "extent");
        if (e == 0) throw FormatError("zero extent in tensor header");
    }
    const std::size_t n = numel(shape);
    std::vector<T> data;
    switch (type) {
        case ElementType::F32: data = read_elements<float, T>(in, n); break;
        case ElementType::F64: data = read_elements<double, T>(in, n); break;
        default: throw FormatError("unknown tensor element type");
    }
    if (rank == 0) return Tensor<T>::scalar(data.at(0));
    return Tensor<T>(std::move(shape), std::move(data));
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const Tensor<T>& t) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    write_tensor(out, t);
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return read_tensor<T>(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

#define AIN_INSTANTIATE(T)                                                        \
    template void write_tensor<T>(std::ostream&, const Tensor<T>&);               \
    template Tensor<T> read_tensor<T>(std::istream&);                             \
    template void save_tensor<T>(const std::filesystem::path&, const Tensor<T>&); \
    template Tensor<T> load_tensor<T>(const std::filesystem::path&);
AIN_INSTANTIATE(float)
AIN_INSTANTIATE(double)
#undef AIN_INSTANTIATE

}  // namespace ain
