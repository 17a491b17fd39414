# BankSpill source package
