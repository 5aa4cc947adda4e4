#pragma once

#include <string_view>

namespace brook {

// Workload sources compiled into the library from core/workloads/.
std::string_view store_dsl();
std::string_view tpcc_dsl();

}  // namespace brook
