"""docmt: a desk-scale multilingual document-level NMT transfer toolkit.

The package trains compact encoder-decoder translation models on sentence
and document data mixed by a teacher/student schedule, decodes documents
under a sentence-count constraint, and measures whether document skills
learned on teacher language pairs transfer to sentence-only students.
"""

from .corpus import (DocumentCorpus, ParallelDocCorpus, read_doc_corpus, read_parallel,
                     write_doc_corpus)
from .d2d import (MAX_DOC_TOKENS, MAX_SEN_TOKENS, Chunk, TrainingExample, chunk_document,
                  document_examples, make_training_example, reassemble, sentence_examples,
                  split_translation)
from .decode import BeamConfig, Hypothesis, NeuralScorer, beam_search, doc_infer, sen_infer
from .errors import (AlignmentError, ConfigError, CorpusFormatError, DocmtError,
                     ManifestError, NumericError, ValidationError, VocabError)
from .metrics import (ContrastiveItem, contrastive_accuracy, corpus_bleu, doc_bleu,
                      pronoun_f1)
from .model import ModelConfig, ModelParams, desk_config, full_config, init_model
from .sampler import MixSchedule, Pool, build_schedule
from .tokenizer import (BOS_ID, EOS_ID, PAD_ID, SEN_ID, UNK_ID, Vocabulary, train_bpe)
from .trainer import TrainConfig, finetune_docnmt, lr_at, pretrain_sennmt, train_loop

__version__ = "0.1.0"

__all__ = [
    "AlignmentError", "BOS_ID", "BeamConfig", "Chunk", "ConfigError",
    "ContrastiveItem", "CorpusFormatError", "DocmtError", "DocumentCorpus",
    "EOS_ID", "Hypothesis", "MAX_DOC_TOKENS", "MAX_SEN_TOKENS", "ManifestError",
    "MixSchedule", "ModelConfig", "ModelParams", "NeuralScorer", "NumericError",
    "PAD_ID", "ParallelDocCorpus", "Pool", "SEN_ID", "TrainConfig",
    "TrainingExample", "UNK_ID", "ValidationError", "VocabError", "Vocabulary",
    "beam_search", "build_schedule", "chunk_document", "contrastive_accuracy",
    "corpus_bleu", "desk_config", "doc_bleu", "doc_infer", "document_examples",
    "finetune_docnmt", "full_config", "init_model", "lr_at",
    "make_training_example", "pretrain_sennmt", "pronoun_f1", "read_doc_corpus",
    "read_parallel", "reassemble", "sen_infer", "sentence_examples",
    "split_translation", "train_bpe", "train_loop", "write_doc_corpus",
]
