namespace seqbound {}
