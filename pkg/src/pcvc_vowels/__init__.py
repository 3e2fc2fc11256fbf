"""Persian vowel recognition: energy-based vowel segmentation, MFCC features,
and a sigmoid MLP trained with scaled conjugate gradient."""

from .audio_io import AudioClip, read_wav, write_wav
from .mfcc import MfccConfig, mfcc, pool_features
from .mlp import MlpModel, TrainOptions, load_model, predict, save_model, train_scg
from .phonemes import CONSONANTS, VOWELS, VowelLabel
from .pipeline import evaluate, predict_file, split_by_speaker, train_pipeline
from .segmenter import SegmentParams, VowelSegment, extract_vowel

__version__ = "0.1.0"
