#include "ggsd/error.hpp"

namespace ggsd {

void throw_usage(const std::string& what) { throw Error(ErrorKind::Usage, what); }
void throw_data(const std::string& what) { throw Error(ErrorKind::Data, what); }
void throw_numeric(const std::string& what) { throw Error(ErrorKind::Numeric, what); }

}  // namespace ggsd
