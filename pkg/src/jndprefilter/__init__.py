"""JND prefiltering toolkit: DCT-domain JND filter, IQA-guided training data
generation with a codec in the loop, and the IQNet residual prefilter."""

__version__ = "0.1.0"
