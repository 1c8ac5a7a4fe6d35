# Result store package
