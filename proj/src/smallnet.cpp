#include "mca/smallnet.hpp"

namespace mca {

void NetConfig::validate() const {
  if (classes < 2) throw InvalidArgument("network needs at least 2 classes");
  if (frames < 2) throw InvalidArgument("network needs at least 2 frames for temporal differences");
  if (height < 1 || width < 1) throw InvalidArgument("network input must have positive spatial size");
  if (conv1_channels < 1 || conv2_channels < 1) throw InvalidArgument("convolution widths must be positive");
}

template class SmallNet<float>;
template class SmallNet<double>;

}  // namespace mca
