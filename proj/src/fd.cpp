#include "kblow/fd.hpp"

namespace kblow::fd {

template class BasicDifferentiator<double>;

}  // namespace kblow::fd
