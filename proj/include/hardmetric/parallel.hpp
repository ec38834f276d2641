#ifndef HARDMETRIC_PARALLEL_HPP_
#define HARDMETRIC_PARALLEL_HPP_

namespace hm::parallel {

/// Kernel thread cap. Defaults to HM_THREADS from the environment, or 1.
/// Every kernel produces bitwise-identical output for any thread count:
/// parallel loops only write independent output slots and all reductions
/// run in a fixed serial order.
int threads();

/// Programmatic override; 0 restores the environment default.
void set_threads(int n);

}  // namespace hm::parallel

#endif  // HARDMETRIC_PARALLEL_HPP_
