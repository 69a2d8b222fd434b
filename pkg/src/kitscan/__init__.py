"""Static analysis and classification of phishing-kit archives."""

from .config import ScanConfig, load_config
from .ingest import KitArchive, load_kit
from .scan import KitScan, scan_archive, scan_corpus, scan_path

__version__ = "0.1.0"

__all__ = ["KitArchive", "KitScan", "ScanConfig", "load_config", "load_kit", "scan_archive", "scan_corpus",
           "scan_path", "__version__"]
