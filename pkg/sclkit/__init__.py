# sclkit package
